"""Hot numeric kernels with two interchangeable implementations.

Each kernel exists as an explicit-loop version (compiled with numba when the
numba backend is active) and a vectorized numpy version. The module-level
names resolve to one or the other at import time; see ``_backend``.

Status conventions: factorizations return ``-1`` on success, otherwise the
index of the first rejected pivot.
"""
import numpy as np
import scipy.linalg

from ._backend import USE_NUMBA, njit

EPS = np.finfo(np.float64).eps


@njit
def _pivot_tol(diag_max, d):
    return d * EPS * diag_max


# -- explicit-loop kernels -------------------------------------------------

@njit
def cholesky_loop(A):
    d = A.shape[0]
    L = np.zeros((d, d))
    diag_max = 0.0
    for i in range(d):
        if A[i, i] > diag_max:
            diag_max = A[i, i]
    tol = _pivot_tol(diag_max, d)
    for j in range(d):
        s = A[j, j]
        for k in range(j):
            s -= L[j, k] * L[j, k]
        if not s > tol:
            return L, j
        ljj = np.sqrt(s)
        L[j, j] = ljj
        for i in range(j + 1, d):
            t = A[i, j]
            for k in range(j):
                t -= L[i, k] * L[j, k]
            L[i, j] = t / ljj
    return L, -1


@njit
def cholesky_solve_loop(L, b):
    d = L.shape[0]
    y = np.empty(d)
    for i in range(d):
        s = b[i]
        for k in range(i):
            s -= L[i, k] * y[k]
        y[i] = s / L[i, i]
    x = np.empty(d)
    for i in range(d - 1, -1, -1):
        s = y[i]
        for k in range(i + 1, d):
            s -= L[k, i] * x[k]
        x[i] = s / L[i, i]
    return x


@njit
def sherman_morrison_loop(A_inv, x):
    """In-place (A + x x^T)^{-1} from A^{-1}; returns the denominator.

    A_inv is left untouched when the denominator is not positive.
    """
    d = A_inv.shape[0]
    u = np.zeros(d)
    for i in range(d):
        s = 0.0
        for j in range(d):
            s += A_inv[i, j] * x[j]
        u[i] = s
    denom = 1.0
    for i in range(d):
        denom += x[i] * u[i]
    if not denom > 0.0:
        return denom
    for i in range(d):
        ui = u[i] / denom
        for j in range(d):
            A_inv[i, j] -= ui * u[j]
    return denom


@njit
def ucb_scores_loop(A_inv, b, x, alpha):
    n_arms, d = b.shape
    p = np.empty(n_arms)
    for a in range(n_arms):
        mean = 0.0
        width = 0.0
        for i in range(d):
            theta_i = 0.0
            w_i = 0.0
            for j in range(d):
                theta_i += A_inv[a, i, j] * b[a, j]
                w_i += A_inv[a, i, j] * x[j]
            mean += x[i] * theta_i
            width += x[i] * w_i
        p[a] = mean + alpha * np.sqrt(width)
    return p


@njit
def accumulate_loop(M, v, x, y):
    d = x.shape[0]
    for i in range(d):
        xi = x[i]
        v[i] += y * xi
        for j in range(d):
            M[i, j] += xi * x[j]


# -- vectorized numpy kernels ----------------------------------------------

def cholesky_numpy(A):
    d = A.shape[0]
    tol = _pivot_tol(max(float(np.max(np.diag(A))), 0.0), d)
    try:
        L = np.linalg.cholesky(A)
    except np.linalg.LinAlgError:
        # LAPACK does not say where it stopped; rerun the loop to find the pivot.
        return getattr(cholesky_loop, "py_func", cholesky_loop)(A)
    bad = np.flatnonzero(~(np.diag(L) ** 2 > tol))
    if bad.size:
        return L, int(bad[0])
    return L, -1


def cholesky_solve_numpy(L, b):
    y = scipy.linalg.solve_triangular(L, b, lower=True, check_finite=False)
    return scipy.linalg.solve_triangular(L.T, y, lower=False, check_finite=False)


def sherman_morrison_numpy(A_inv, x):
    u = A_inv @ x
    denom = 1.0 + float(x @ u)
    if not denom > 0.0:
        return denom
    A_inv -= np.outer(u / denom, u)
    return denom


def ucb_scores_numpy(A_inv, b, x, alpha):
    theta = np.matmul(A_inv, b[:, :, None])[:, :, 0]
    width = np.matmul(np.matmul(A_inv, x), x)
    with np.errstate(invalid="ignore"):
        return theta @ x + alpha * np.sqrt(width)


def accumulate_numpy(M, v, x, y):
    M += np.outer(x, x)
    v += y * x


if USE_NUMBA:
    cholesky = cholesky_loop
    cholesky_solve = cholesky_solve_loop
    sherman_morrison = sherman_morrison_loop
    ucb_scores = ucb_scores_loop
    accumulate = accumulate_loop
else:
    cholesky = cholesky_numpy
    cholesky_solve = cholesky_solve_numpy
    sherman_morrison = sherman_morrison_numpy
    ucb_scores = ucb_scores_numpy
    accumulate = accumulate_numpy


# (loop, numpy) pairs for cross-checking both paths in one process.
IMPLEMENTATIONS = {
    "cholesky": (cholesky_loop, cholesky_numpy),
    "cholesky_solve": (cholesky_solve_loop, cholesky_solve_numpy),
    "sherman_morrison": (sherman_morrison_loop, sherman_morrison_numpy),
    "ucb_scores": (ucb_scores_loop, ucb_scores_numpy),
    "accumulate": (accumulate_loop, accumulate_numpy),
}
