"""Coordinate-descent solvers for the weighted and squared-l1 lassos.

Two penalized least-squares problems are solved here:

* weighted lasso:  min_b  0.5*|y - A b|^2 + sum_j pen_j |b_j|
* squared-l1 ("organic") objective:
      min_b  (1/n)*|y - A b|^2 + 2*lam*(|b|_1)^2,
  whose attained minimum value is a noise-variance estimator.

The squared-l1 problem is reduced to the weighted one through its
stationarity condition: a minimizer coincides with the lasso solution
at penalty level mu* = 4*lam*|b|_1, and mu -> mu - 4*lam*t(mu) is
strictly increasing in mu (t(mu) = |b(mu)|_1 is nonincreasing), so the
fixed point is found by bisection on mu.

The cyclic coordinate-descent kernel is JIT-compiled with numba; a
single sweep is O(n p) via residual updates.
"""

from __future__ import annotations

import numpy as np
from numba import njit

from .exceptions import ConvergenceError


@njit(cache=True)
def _cd_sweeps(A, y, pen, beta, max_sweeps, tol):
    """Cyclic CD on 0.5*|y - A b|^2 + sum_j pen_j |b_j|, in place.

    Returns the number of sweeps used, or -1 if the max-coordinate-change
    stopping rule was never met.
    """
    n, p = A.shape
    colsq = np.zeros(p)
    for j in range(p):
        acc = 0.0
        for i in range(n):
            acc += A[i, j] * A[i, j]
        colsq[j] = acc
    r = y - A @ beta
    for sweep in range(max_sweeps):
        delta = 0.0
        for j in range(p):
            if colsq[j] <= 0.0:
                continue
            bj = beta[j]
            zj = colsq[j] * bj
            for i in range(n):
                zj += A[i, j] * r[i]
            if zj > pen[j]:
                bnew = (zj - pen[j]) / colsq[j]
            elif zj < -pen[j]:
                bnew = (zj + pen[j]) / colsq[j]
            else:
                bnew = 0.0
            d = bnew - bj
            if d != 0.0:
                for i in range(n):
                    r[i] -= A[i, j] * d
                beta[j] = bnew
                ad = abs(d)
                if ad > delta:
                    delta = ad
        if delta < tol:
            return sweep + 1
    return -1


def weighted_lasso(
    A: np.ndarray,
    y: np.ndarray,
    penalties: np.ndarray,
    beta0: np.ndarray | None = None,
    tol: float = 1e-8,
    max_sweeps: int = 100_000,
) -> np.ndarray:
    """Minimize 0.5*|y - A b|^2 + sum_j pen_j |b_j| by cyclic CD."""
    A = np.ascontiguousarray(A, dtype=float)
    y = np.ascontiguousarray(y, dtype=float)
    pen = np.ascontiguousarray(np.broadcast_to(penalties, (A.shape[1],)), dtype=float)
    beta = np.zeros(A.shape[1]) if beta0 is None else beta0.astype(float).copy()
    sweeps = _cd_sweeps(A, y, pen, beta, max_sweeps, tol)
    if sweeps < 0:
        resid = y - A @ beta
        raise ConvergenceError(
            f"coordinate descent did not converge in {max_sweeps} sweeps "
            f"(residual norm {np.linalg.norm(resid):.6e}, "
            f"max |grad| {np.abs(A.T @ resid).max():.6e})"
        )
    return beta


def lasso_kkt_residual(
    A: np.ndarray, y: np.ndarray, penalties: np.ndarray, beta: np.ndarray
) -> float:
    """Worst per-coordinate violation of the lasso stationarity conditions."""
    g = A.T @ (y - A @ beta)  # = pen * sign(b_j) at a minimizer, |g| <= pen at 0
    pen = np.broadcast_to(penalties, beta.shape)
    viol = np.where(
        beta != 0.0,
        np.abs(g - pen * np.sign(beta)),
        np.maximum(np.abs(g) - pen, 0.0),
    )
    return float(viol.max()) if viol.size else 0.0


def organic_lasso_min_value(
    A: np.ndarray,
    y: np.ndarray,
    lam: float,
    tol: float = 1e-8,
    max_bisect: int = 200,
) -> tuple[float, np.ndarray]:
    """Minimum of (1/n)|y - A b|^2 + 2*lam*(|b|_1)^2 and its minimizer.

    Because the penalty is squared, b = 0 is optimal iff A^T y = 0; the
    outer penalty level is otherwise located by bisection on the
    strictly increasing map mu -> mu - 4*lam*|b(mu)|_1.
    """
    A = np.ascontiguousarray(A, dtype=float)
    y = np.ascontiguousarray(y, dtype=float)
    n = y.shape[0]

    def objective(beta):
        r = y - A @ beta
        t = np.abs(beta).sum()
        return float(r @ r / n + 2.0 * lam * t * t)

    grad0 = A.T @ y
    mu_hi = 2.0 / n * np.abs(grad0).max() if grad0.size else 0.0
    if mu_hi == 0.0:
        return float(y @ y / n), np.zeros(A.shape[1])

    # lasso in (1/n)-loss scaling: pen_j = n*mu/2 in the 0.5*|.|^2 form
    beta = np.zeros(A.shape[1])
    lo, hi = 0.0, mu_hi
    for _ in range(max_bisect):
        mu = 0.5 * (lo + hi)
        beta = weighted_lasso(A, y, np.full(A.shape[1], n * mu / 2.0),
                              beta0=beta, tol=tol * 1e-2)
        gap = mu - 4.0 * lam * np.abs(beta).sum()
        if abs(gap) <= tol * mu_hi:
            break
        if gap > 0.0:
            hi = mu
        else:
            lo = mu
    return objective(beta), beta
