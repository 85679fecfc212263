"""Multivariate least squares and covariance machinery.

Fits all responses against a shared design matrix and provides the
pointwise prediction covariance q(x)*Sigma together with the matrix
criteria and the sorted-eigenvalue comparison used to rank covariance
matrices.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .model import TermSpec, evaluate_basis

__all__ = [
    "SingularDesignError",
    "FittedModel",
    "CovCompare",
    "fit_ols",
    "predict",
    "unit_variance",
    "covariance_at",
    "matrix_criterion",
    "eigen_sym",
    "matrix_sqrt",
    "compare_covariances",
]

MATRIX_CRITERIA = ("trace", "determinant", "elementsum", "lambda_max", "lambda_min", "lambda_j")


class SingularDesignError(ValueError):
    """X'X is numerically rank deficient."""


@dataclass(frozen=True)
class FittedModel:
    """Least-squares fit of all responses against one design matrix."""

    terms: TermSpec
    b_hat: np.ndarray      # (p, r), column k = coefficient vector of response k
    sigma_hat: np.ndarray  # (r, r) residual covariance, divisor N - p
    xtx_inv: np.ndarray    # (p, p)
    residuals: np.ndarray  # (N, r)
    n_obs: int

    @property
    def p(self) -> int:
        return self.b_hat.shape[0]

    @property
    def r(self) -> int:
        return self.b_hat.shape[1]

    @property
    def n(self) -> int:
        return self.terms.n


@dataclass(frozen=True)
class CovCompare:
    """Sorted-eigenvalue comparison of two covariance matrices.

    ``eigen_gaps[j]`` is the difference of the j-th largest eigenvalues.
    The verdict is ``first_smaller`` only when every gap is strictly
    negative and the matrices differ (a weak Pareto order, not the
    Loewner order).
    """

    verdict: str
    eigen_gaps: np.ndarray


def fit_ols(X: np.ndarray, Y: np.ndarray, terms: TermSpec) -> FittedModel:
    """b_hat = (X'X)^{-1} X'Y; sigma_hat = residual cross-products / (N - p)."""
    X = np.asarray(X, dtype=float)
    Y = np.asarray(Y, dtype=float)
    if Y.ndim == 1:
        Y = Y[:, None]
    n_obs, p = X.shape
    if n_obs <= p:
        raise ValueError(f"need N > p, got N={n_obs}, p={p}")
    xtx = X.T @ X
    eig = np.linalg.eigvalsh(xtx)
    if eig[0] < 1e-10 * max(eig[-1], 1.0):
        raise SingularDesignError("singular design")
    xtx_inv = np.linalg.inv(xtx)
    b_hat = xtx_inv @ (X.T @ Y)
    residuals = Y - X @ b_hat
    sigma_hat = residuals.T @ residuals / (n_obs - p)
    sigma_hat = 0.5 * (sigma_hat + sigma_hat.T)
    return FittedModel(
        terms=terms,
        b_hat=b_hat,
        sigma_hat=sigma_hat,
        xtx_inv=0.5 * (xtx_inv + xtx_inv.T),
        residuals=residuals,
        n_obs=n_obs,
    )


def predict(model: FittedModel, x) -> np.ndarray:
    """Predicted response vector z'(x) b_hat; batch-aware over leading axes."""
    z = evaluate_basis(x, model.terms)
    return z @ model.b_hat


def unit_variance(model: FittedModel, x) -> np.ndarray | float:
    """q(x) = z'(x) (X'X)^{-1} z(x); the shared scale of all prediction variances."""
    z = evaluate_basis(x, model.terms)
    q = np.einsum("...i,ij,...j->...", z, model.xtx_inv, z)
    return float(q) if np.ndim(q) == 0 else q


def covariance_at(model: FittedModel, x) -> np.ndarray:
    """Estimated covariance of the predicted response vector: q(x) * sigma_hat."""
    q = unit_variance(model, x)
    if np.ndim(q) == 0:
        return float(q) * model.sigma_hat
    return np.multiply.outer(np.asarray(q), model.sigma_hat)


def _check_symmetric(C: np.ndarray, tol: float = 1e-9) -> np.ndarray:
    C = np.asarray(C, dtype=float)
    if C.ndim != 2 or C.shape[0] != C.shape[1]:
        raise ValueError("expected a square matrix")
    if np.max(np.abs(C - C.T)) > tol * max(1.0, np.max(np.abs(C))):
        raise ValueError("matrix is not symmetric")
    return 0.5 * (C + C.T)


def eigen_sym(C: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Eigenvalues (descending) and matching orthonormal eigenvectors."""
    C = _check_symmetric(C)
    vals, vecs = np.linalg.eigh(C)
    order = np.argsort(vals)[::-1]
    return vals[order], vecs[:, order]


def matrix_criterion(C: np.ndarray, kind: str, j: int | None = None) -> float:
    """Scalar ranking functions of a covariance matrix.

    ``lambda_j`` indexes the descending spectrum with 1-based j.
    """
    C = _check_symmetric(C)
    if kind == "trace":
        return float(np.trace(C))
    if kind == "determinant":
        return float(np.linalg.det(C))
    if kind == "elementsum":
        return float(np.sum(C))
    vals, _ = eigen_sym(C)
    if kind == "lambda_max":
        return float(vals[0])
    if kind == "lambda_min":
        return float(vals[-1])
    if kind == "lambda_j":
        if j is None or not 1 <= j <= C.shape[0]:
            raise ValueError(f"lambda_j needs 1 <= j <= {C.shape[0]}")
        return float(vals[j - 1])
    raise ValueError(f"unknown criterion {kind!r}")


def matrix_sqrt(C: np.ndarray) -> np.ndarray:
    """Symmetric PSD square root; tiny negative eigenvalues are clamped to 0."""
    vals, vecs = eigen_sym(C)
    lam_max = max(float(vals[0]), 0.0)
    if np.any(vals < -1e-6 * max(lam_max, 1.0)):
        raise ValueError("not PSD")
    vals = np.clip(vals, 0.0, None)
    return (vecs * np.sqrt(vals)) @ vecs.T


def compare_covariances(C1: np.ndarray, C2: np.ndarray) -> CovCompare:
    """Weak Pareto comparison via the sorted spectra of C1 and C2."""
    a, _ = eigen_sym(C1)
    g, _ = eigen_sym(C2)
    if a.shape != g.shape:
        raise ValueError("dimension mismatch")
    gaps = a - g
    scale = max(np.max(np.abs(a)), np.max(np.abs(g)), 1.0)
    same_matrix = np.max(np.abs(np.asarray(C1, float) - np.asarray(C2, float))) <= 1e-12 * scale
    same_spectrum = np.max(np.abs(gaps)) <= 1e-12 * scale
    if same_matrix or same_spectrum:
        verdict = "equal"
    elif np.all(gaps < 0):
        verdict = "first_smaller"
    elif np.all(gaps > 0):
        verdict = "second_smaller"
    else:
        verdict = "incomparable"
    return CovCompare(verdict=verdict, eigen_gaps=gaps)
