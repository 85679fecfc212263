"""Designed experiments, polynomial term sets and feasible regions.

Everything here is immutable after construction and all functions are
pure, so concurrent use needs no locking.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

__all__ = [
    "TermSpec",
    "Region",
    "Run",
    "ExperimentData",
    "evaluate_basis",
    "build_design_matrix",
    "region_contains",
]


def _parse_monomial(name: str, n: int) -> tuple[int, ...]:
    """Parse a monomial name like ``1``, ``x2``, ``x1*x3`` or ``x2^2``."""
    name = name.replace(" ", "")
    if name in ("1", ""):
        return ()
    factors: list[int] = []
    for part in name.split("*"):
        if "^" in part:
            base, exp = part.split("^")
            reps = int(exp)
        else:
            base, reps = part, 1
        if not base.startswith("x"):
            raise ValueError(f"cannot parse monomial factor {part!r}")
        idx = int(base[1:]) - 1
        if not 0 <= idx < n:
            raise ValueError(f"factor index out of range in {name!r}")
        factors.extend([idx] * reps)
    return tuple(sorted(factors))


@dataclass(frozen=True)
class TermSpec:
    """Ordered list of monomials defining the basis vector z(x).

    Each term is a sorted tuple of factor indices; the empty tuple is the
    intercept. Total degree of every term is at most 2 and the intercept
    comes first, matching the coefficient ordering used downstream.
    """

    n: int
    terms: tuple[tuple[int, ...], ...]

    def __post_init__(self) -> None:
        if self.n < 1:
            raise ValueError("need at least one factor")
        terms = tuple(tuple(sorted(t)) for t in self.terms)
        object.__setattr__(self, "terms", terms)
        if not terms or terms[0] != ():
            raise ValueError("first term must be the intercept")
        if len(set(terms)) != len(terms):
            raise ValueError("duplicate monomials")
        for t in terms:
            if len(t) > 2:
                raise ValueError(f"monomial degree > 2: {t}")
            if any(i < 0 or i >= self.n for i in t):
                raise ValueError(f"factor index out of range: {t}")

    @property
    def p(self) -> int:
        return len(self.terms)

    @classmethod
    def full_second_order(cls, n: int) -> "TermSpec":
        """Intercept, linears, squares, then i<j cross terms: p = 1 + n + n(n+1)/2."""
        terms: list[tuple[int, ...]] = [()]
        terms += [(i,) for i in range(n)]
        terms += [(i, i) for i in range(n)]
        terms += [(i, j) for i in range(n) for j in range(i + 1, n)]
        return cls(n=n, terms=tuple(terms))

    @classmethod
    def from_names(cls, names: list[str], n: int) -> "TermSpec":
        return cls(n=n, terms=tuple(_parse_monomial(s, n) for s in names))

    def term_names(self) -> list[str]:
        out = []
        for t in self.terms:
            if not t:
                out.append("1")
            elif len(t) == 2 and t[0] == t[1]:
                out.append(f"x{t[0] + 1}^2")
            else:
                out.append("*".join(f"x{i + 1}" for i in t))
        return out


@dataclass(frozen=True)
class Region:
    """Feasible region: a closed hypercube or a hypersphere ||x|| <= radius.

    The factor bounds are closed even though optima may sit exactly on
    them; an open box would have no attained minimum there.
    """

    kind: str
    lower: np.ndarray | None = None
    upper: np.ndarray | None = None
    radius: float | None = None
    dim: int | None = None

    def __post_init__(self) -> None:
        if self.kind == "hypercube":
            lo = np.asarray(self.lower, dtype=float)
            hi = np.asarray(self.upper, dtype=float)
            if lo.shape != hi.shape or lo.ndim != 1:
                raise ValueError("lower/upper must be 1-d and congruent")
            if not np.all(lo < hi):
                raise ValueError("require lower < upper componentwise")
            object.__setattr__(self, "lower", lo)
            object.__setattr__(self, "upper", hi)
        elif self.kind == "hypersphere":
            if self.radius is None or not self.radius > 0:
                raise ValueError("radius must be positive")
        else:
            raise ValueError(f"unknown region kind {self.kind!r}")

    @classmethod
    def hypercube(cls, lower, upper) -> "Region":
        return cls(kind="hypercube", lower=lower, upper=upper)

    @classmethod
    def hypersphere(cls, radius: float, dim: int | None = None) -> "Region":
        return cls(kind="hypersphere", radius=radius, dim=dim)

    @classmethod
    def unit_cube(cls, n: int) -> "Region":
        return cls.hypercube(-np.ones(n), np.ones(n))

    def bounding_box(self, n: int | None = None) -> tuple[np.ndarray, np.ndarray]:
        if self.kind == "hypercube":
            return self.lower.copy(), self.upper.copy()
        if n is None:
            n = self.dim
        if n is None:
            raise ValueError("hypersphere bounding box needs the dimension")
        c = float(self.radius)
        return -c * np.ones(n), c * np.ones(n)

    def contains(self, x, atol: float = 0.0) -> bool:
        x = np.asarray(x, dtype=float)
        if self.kind == "hypercube":
            if x.shape != self.lower.shape:
                raise ValueError("dimension mismatch")
            return bool(np.all(x >= self.lower - atol) and np.all(x <= self.upper + atol))
        return bool(x @ x <= self.radius**2 + atol)

    def clip(self, x: np.ndarray) -> np.ndarray:
        """Project a point into the region (used by local searches)."""
        x = np.asarray(x, dtype=float)
        if self.kind == "hypercube":
            return np.clip(x, self.lower, self.upper)
        nrm = float(np.linalg.norm(x))
        if nrm <= self.radius:
            return x
        return x * (self.radius / nrm)


def region_contains(region: Region, x, atol: float = 0.0) -> bool:
    return region.contains(x, atol=atol)


@dataclass(frozen=True)
class Run:
    """One design point: coded factor settings and replicated observations.

    ``y`` has one row per replicate and one column per response, so
    replicate counts may differ between runs.
    """

    run_id: int
    x: np.ndarray
    y: np.ndarray

    def __post_init__(self) -> None:
        x = np.atleast_1d(np.asarray(self.x, dtype=float))
        y = np.atleast_2d(np.asarray(self.y, dtype=float))
        if y.shape[0] < 1:
            raise ValueError(f"run {self.run_id}: needs at least one replicate")
        object.__setattr__(self, "x", x)
        object.__setattr__(self, "y", y)


@dataclass(frozen=True)
class ExperimentData:
    runs: tuple[Run, ...]
    response_names: tuple[str, ...] = field(default=())

    def __post_init__(self) -> None:
        if not self.runs:
            raise ValueError("no runs")
        n = self.runs[0].x.size
        r = self.runs[0].y.shape[1]
        for run in self.runs:
            if run.x.size != n:
                raise ValueError(f"run {run.run_id}: inconsistent factor count")
            if run.y.shape[1] != r:
                raise ValueError(f"run {run.run_id}: inconsistent response count")
            if not np.all(np.isfinite(run.y)) or not np.all(np.isfinite(run.x)):
                raise ValueError(f"run {run.run_id}: non-finite values")
        if not self.response_names:
            object.__setattr__(
                self, "response_names", tuple(f"Y{k + 1}" for k in range(r))
            )
        if len(self.response_names) != r:
            raise ValueError("response_names length mismatch")

    @property
    def n_factors(self) -> int:
        return self.runs[0].x.size

    @property
    def n_responses(self) -> int:
        return self.runs[0].y.shape[1]

    @property
    def n_observations(self) -> int:
        """Total replicate count = row count of the expanded design matrix."""
        return sum(run.y.shape[0] for run in self.runs)


def evaluate_basis(x, terms: TermSpec) -> np.ndarray:
    """Evaluate z(x) for a single point (n,) or a batch (..., n).

    Component j is the product of the factors named by monomial j; the
    intercept evaluates to 1. Ordering follows ``terms`` exactly.
    """
    x = np.asarray(x, dtype=float)
    if x.shape[-1] != terms.n:
        raise ValueError(f"expected {terms.n} factors, got {x.shape[-1]}")
    cols = []
    for t in terms.terms:
        col = np.ones(x.shape[:-1])
        for i in t:
            col = col * x[..., i]
        cols.append(col)
    return np.stack(cols, axis=-1)


def build_design_matrix(
    data: ExperimentData, terms: TermSpec
) -> tuple[np.ndarray, np.ndarray]:
    """Expand replicates into rows of X and stack Y in the same order.

    Returns (X, Y) with shapes (N, p) and (N, r); replicate rows of the
    same run share the same basis row.
    """
    if terms.n != data.n_factors:
        raise ValueError("term spec and data disagree on factor count")
    x_rows, y_rows = [], []
    for run in data.runs:
        z = evaluate_basis(run.x, terms)
        for rep in run.y:
            x_rows.append(z)
            y_rows.append(rep)
    X = np.array(x_rows, dtype=float)
    Y = np.array(y_rows, dtype=float)
    if terms.p > X.shape[0]:
        raise ValueError(
            f"underdetermined design: p={terms.p} exceeds N={X.shape[0]}"
        )
    return X, Y
