"""Deterministic scalar programs for the stochastic solution concepts.

Each constructor turns a fitted multiresponse model into a
``ScalarProgram``: an objective over the factor space, optional equality
constraints, and a feasible region. Objectives are vectorized over a
leading batch axis so the grid oracle can evaluate millions of points.

Notation used throughout: m_k(x) is the predicted mean of response k and
s_k(x) = sqrt(sigma_kk * q(x)) its prediction standard deviation.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable

import numpy as np
from scipy.special import ndtri

from .fit import FittedModel, covariance_at, matrix_sqrt, predict, unit_variance
from .model import Region

__all__ = [
    "MethodConfig",
    "ScalarProgram",
    "GoalDeviations",
    "v_model",
    "mean_weighting",
    "modified_e_weighting",
    "modified_e_epsilon",
    "p_model_terms",
    "p_model_weighting",
    "p_model_epsilon",
    "kataoka_terms",
    "kataoka_weighting",
    "kataoka_epsilon",
    "goal_deviations",
    "goal_programming",
    "normal_quantile",
    "joint_probability_mc",
]


@dataclass(frozen=True)
class MethodConfig:
    """Knobs shared by the method constructors.

    ``confidence`` is the probability level of the Kataoka-style terms
    (one knob; 0.5 makes the quantile term vanish). ``primary_index`` is
    1-based and names the response kept as the objective in
    epsilon-constraint programs. ``variance_scale`` multiplies q(x) in
    scalarized objectives; it defaults to 1 and is only ever set
    explicitly (the worked example uses N because q scales as 1/N for an
    orthogonal design).
    """

    tau: np.ndarray | None = None
    w: np.ndarray | None = None
    confidence: float = 0.95
    r1: float = 0.5
    r2: float = 0.5
    variance_scale: float = 1.0
    primary_index: int | None = None
    epsilon: np.ndarray | None = None

    def __post_init__(self) -> None:
        for name in ("tau", "w", "epsilon"):
            v = getattr(self, name)
            if v is not None:
                v = np.asarray(v, dtype=float)
                if not np.all(np.isfinite(v)):
                    raise ValueError(f"{name} must be finite")
                object.__setattr__(self, name, v)
        if self.w is not None:
            if np.any(self.w < 0) or abs(float(np.sum(self.w)) - 1.0) > 1e-9:
                raise ValueError("weights must be nonnegative and sum to 1")
        if not 0.0 < self.confidence < 1.0:
            raise ValueError("confidence must lie in (0, 1)")
        if self.r1 < 0 or self.r2 < 0 or abs(self.r1 + self.r2 - 1.0) > 1e-9:
            raise ValueError("r1, r2 must be nonnegative with r1 + r2 = 1")
        if self.variance_scale <= 0:
            raise ValueError("variance_scale must be positive")


@dataclass(frozen=True)
class ScalarProgram:
    """Objective, equality constraints (== 0) and region for one method."""

    objective: Callable[[np.ndarray], np.ndarray]
    region: Region
    descriptor: str
    eq_constraints: tuple[Callable[[np.ndarray], np.ndarray], ...] = field(default=())


@dataclass(frozen=True)
class GoalDeviations:
    """Componentwise positive/negative parts of (kataoka term - tau)."""

    d_plus: np.ndarray
    d_minus: np.ndarray


def _default_region(model: FittedModel, region: Region | None) -> Region:
    return region if region is not None else Region.unit_cube(model.n)


def _require(cfg: MethodConfig, *names: str) -> None:
    for name in names:
        if getattr(cfg, name) is None:
            raise ValueError(f"method requires config field {name!r}")


def _std_dev(model: FittedModel, x) -> np.ndarray:
    """s_k(x) for all k; shape (..., r)."""
    q = np.asarray(unit_variance(model, x))
    return np.sqrt(np.multiply.outer(q, np.diag(model.sigma_hat)))


def v_model(model: FittedModel, cfg: MethodConfig | None = None,
            region: Region | None = None) -> ScalarProgram:
    """Minimum-variance program: every matrix criterion of q(x)*Sigma shares
    its argmin with q(x), so the objective is just (scaled) q."""
    scale = cfg.variance_scale if cfg is not None else 1.0
    return ScalarProgram(
        objective=lambda x: scale * np.asarray(unit_variance(model, x)),
        region=_default_region(model, region),
        descriptor="v-model",
    )


def mean_weighting(model: FittedModel, cfg: MethodConfig,
                   region: Region | None = None) -> ScalarProgram:
    """Weighted sum of predicted means."""
    _require(cfg, "w")
    w = cfg.w
    return ScalarProgram(
        objective=lambda x: predict(model, x) @ w,
        region=_default_region(model, region),
        descriptor="mean-weighting",
    )


def modified_e_weighting(model: FittedModel, cfg: MethodConfig,
                         region: Region | None = None) -> ScalarProgram:
    """r1 * (weighted mean) + r2 * (scaled q): mean/dispersion trade-off."""
    _require(cfg, "w")
    w, r1, r2, scale = cfg.w, cfg.r1, cfg.r2, cfg.variance_scale

    def objective(x):
        return r1 * (predict(model, x) @ w) + r2 * scale * np.asarray(unit_variance(model, x))

    return ScalarProgram(
        objective=objective,
        region=_default_region(model, region),
        descriptor="modified-e-weighting",
    )


def modified_e_epsilon(model: FittedModel, cfg: MethodConfig,
                       region: Region | None = None) -> ScalarProgram:
    """Minimize scaled q subject to every predicted mean hitting its target."""
    _require(cfg, "tau")
    tau, scale = cfg.tau, cfg.variance_scale

    def make_constraint(k: int):
        return lambda x: predict(model, x)[..., k] - tau[k]

    return ScalarProgram(
        objective=lambda x: scale * np.asarray(unit_variance(model, x)),
        eq_constraints=tuple(make_constraint(k) for k in range(model.r)),
        region=_default_region(model, region),
        descriptor="modified-e-epsilon",
    )


def p_model_terms(model: FittedModel, tau, x) -> np.ndarray:
    """Standardized shortfalls (tau_k - m_k(x)) / s_k(x); shape (..., r)."""
    tau = np.asarray(tau, dtype=float)
    s = _std_dev(model, x)
    if np.any(s <= 0):
        raise ValueError("zero prediction variance")
    return (tau - predict(model, x)) / s


def p_model_weighting(model: FittedModel, cfg: MethodConfig,
                      region: Region | None = None) -> ScalarProgram:
    _require(cfg, "tau", "w")
    tau, w = cfg.tau, cfg.w
    return ScalarProgram(
        objective=lambda x: p_model_terms(model, tau, x) @ w,
        region=_default_region(model, region),
        descriptor="p-model-weighting",
    )


def p_model_epsilon(model: FittedModel, cfg: MethodConfig,
                    region: Region | None = None) -> ScalarProgram:
    """Keep one standardized term as objective; pin the others to epsilon."""
    _require(cfg, "tau", "primary_index", "epsilon")
    tau, eps = cfg.tau, cfg.epsilon
    k_star = cfg.primary_index - 1
    if not 0 <= k_star < model.r:
        raise ValueError("primary_index out of range")

    def make_constraint(k: int):
        return lambda x: p_model_terms(model, tau, x)[..., k] - eps[k]

    return ScalarProgram(
        objective=lambda x: p_model_terms(model, tau, x)[..., k_star],
        eq_constraints=tuple(
            make_constraint(k) for k in range(model.r) if k != k_star
        ),
        region=_default_region(model, region),
        descriptor="p-model-epsilon",
    )


def kataoka_terms(model: FittedModel, cfg: MethodConfig, x) -> np.ndarray:
    """m_k(x) + quantile(confidence) * s_k(x); shape (..., r)."""
    quant = normal_quantile(cfg.confidence)
    return predict(model, x) + quant * _std_dev(model, x)


def kataoka_weighting(model: FittedModel, cfg: MethodConfig,
                      region: Region | None = None) -> ScalarProgram:
    _require(cfg, "w")
    w = cfg.w
    return ScalarProgram(
        objective=lambda x: kataoka_terms(model, cfg, x) @ w,
        region=_default_region(model, region),
        descriptor="kataoka-weighting",
    )


def kataoka_epsilon(model: FittedModel, cfg: MethodConfig,
                    region: Region | None = None) -> ScalarProgram:
    """Minimize the primary Kataoka term; pin the others to their targets."""
    _require(cfg, "tau", "primary_index")
    tau = cfg.tau
    k_star = cfg.primary_index - 1
    if not 0 <= k_star < model.r:
        raise ValueError("primary_index out of range")

    def make_constraint(k: int):
        return lambda x: kataoka_terms(model, cfg, x)[..., k] - tau[k]

    return ScalarProgram(
        objective=lambda x: kataoka_terms(model, cfg, x)[..., k_star],
        eq_constraints=tuple(
            make_constraint(k) for k in range(model.r) if k != k_star
        ),
        region=_default_region(model, region),
        descriptor="kataoka-epsilon",
    )


def goal_deviations(model: FittedModel, cfg: MethodConfig, x) -> GoalDeviations:
    """Positive and negative parts of (kataoka term - tau), componentwise."""
    _require(cfg, "tau")
    diff = kataoka_terms(model, cfg, x) - cfg.tau
    return GoalDeviations(
        d_plus=np.maximum(diff, 0.0),
        d_minus=np.maximum(-diff, 0.0),
    )


def goal_programming(model: FittedModel, cfg: MethodConfig,
                     region: Region | None = None) -> ScalarProgram:
    """Sum of weighted deviations; identical to sum w_k |term_k - tau_k|."""
    _require(cfg, "tau", "w")
    tau, w = cfg.tau, cfg.w
    return ScalarProgram(
        objective=lambda x: np.abs(kataoka_terms(model, cfg, x) - tau) @ w,
        region=_default_region(model, region),
        descriptor="goal-programming",
    )


def normal_quantile(prob: float) -> float:
    """Inverse standard normal CDF on (0, 1)."""
    prob = float(prob)
    if not 0.0 < prob < 1.0:
        raise ValueError("probability must lie strictly inside (0, 1)")
    return float(ndtri(prob))


def joint_probability_mc(model: FittedModel, x, tau, n_samples: int,
                         seed: int) -> tuple[float, float]:
    """Monte-Carlo estimate of P(all predicted responses <= tau) at x.

    Draws from Normal(m(x), q(x)*Sigma) through the symmetric matrix
    square root; returns (estimate, binomial standard error).
    """
    if n_samples < 1000:
        raise ValueError("need at least 1000 samples")
    tau = np.asarray(tau, dtype=float)
    mean = predict(model, x)
    root = matrix_sqrt(covariance_at(model, x))
    rng = np.random.default_rng(seed)
    draws = mean + rng.standard_normal((int(n_samples), model.r)) @ root
    p_hat = float(np.mean(np.all(draws <= tau, axis=1)))
    std_err = float(np.sqrt(p_hat * (1.0 - p_hat) / n_samples))
    return p_hat, std_err
