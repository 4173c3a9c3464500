"""Regularized least squares and rank-one inverse maintenance."""
from __future__ import annotations

import numpy as np

from . import kernels
from .errors import NumericError, SingularMatrixError

SYMMETRY_RTOL = 1e-9
RESYMMETRIZE_EVERY = 500


def _as_finite(a, name, ndim):
    a = np.ascontiguousarray(a, dtype=np.float64)
    if a.ndim != ndim:
        raise ValueError(f"{name} must be {ndim}-dimensional, got shape {a.shape}")
    if not np.all(np.isfinite(a)):
        raise ValueError(f"{name} has non-finite entries")
    return a


def solve_spd(A, b) -> np.ndarray:
    """Solve ``A x = b`` for symmetric positive-definite ``A`` by Cholesky factorization."""
    A = _as_finite(A, "A", 2)
    b = _as_finite(b, "b", 1)
    d = A.shape[0]
    if A.shape != (d, d) or b.shape != (d,) or d == 0:
        raise ValueError(f"shape mismatch: A {A.shape}, b {b.shape}")
    scale = max(1.0, float(np.max(np.abs(A))))
    if np.max(np.abs(A - A.T)) > SYMMETRY_RTOL * scale:
        raise ValueError("A is not symmetric")
    L, status = kernels.cholesky(A)
    if status >= 0:
        raise SingularMatrixError(f"non-positive pivot at index {status} in Cholesky factorization")
    return kernels.cholesky_solve(L, b)


def least_squares(X, y, ridge: float = 0.0) -> np.ndarray:
    """argmin ||X theta - y||^2 + ridge ||theta||^2 via the normal equations."""
    X = np.asarray(X, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    if X.ndim != 2 or y.shape != (X.shape[0],):
        raise ValueError(f"shape mismatch: X {X.shape}, y {y.shape}")
    if ridge < 0:
        raise ValueError("ridge must be non-negative")
    gram = X.T @ X
    gram[np.diag_indices_from(gram)] += ridge
    return solve_spd(gram, X.T @ y)


def rank_one_inverse_update(A_inv, x) -> np.ndarray:
    """(A + x x^T)^{-1} from A^{-1} by Sherman-Morrison; the input is not modified."""
    out = _as_finite(A_inv, "A_inv", 2).copy()
    x = _as_finite(x, "x", 1)
    if out.shape != (x.shape[0], x.shape[0]):
        raise ValueError(f"shape mismatch: A_inv {out.shape}, x {x.shape}")
    denom = kernels.sherman_morrison(out, x)
    if not denom > 0.0:
        raise NumericError(f"Sherman-Morrison denominator {denom} is not positive")
    return out


def symmetrize(M: np.ndarray) -> None:
    """Replace ``M`` in place by ``(M + M^T) / 2``."""
    M[...] = 0.5 * (M + M.T)
