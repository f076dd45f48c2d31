"""Weighted-norm preprocessing and the generalized matrix decomposition.

The central object is the generalized matrix decomposition (GMD) of a
design matrix X with respect to a row kernel H (n x n, SPD) and a column
kernel Q (p x p, SPD):

    X = U S V^T   with   U^T H U = I_K,  V^T Q V = I_K,

minimizing the (H, Q)-weighted reconstruction norm
``|M|_{H,Q}^2 = tr(M^T H M Q)``.  The squared diagonal values of S are
the non-zero eigenvalues of X^T H X Q and the columns of V are the
corresponding eigenvectors.

The decomposition is computed by Cholesky whitening: with H = Lh^T Lh
and Q = Lq^T Lq, the thin SVD of Lh X Lq^T is mapped back through the
triangular factors.  This reuses a mature SVD and is numerically
symmetric in the two kernels.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace

import numpy as np
import scipy.linalg as sla

from .exceptions import DegenerateInputError, DimensionError, KernelError

# Numeric-rank cutoff for the GMD: singular values below RANK_TOL * sigma_1
# are dropped.  Exposed so callers can tighten/loosen it.
RANK_TOL = 1e-12

# One-shot ridge added to a kernel whose Cholesky fails, relative to its
# mean diagonal.  Distance-derived kernels are often borderline PSD.
CHOL_JITTER = 1e-10


def _check_spd(K: np.ndarray, name: str) -> None:
    """Validate symmetry (1e-10 relative, entrywise) and positive definiteness."""
    if K.ndim != 2 or K.shape[0] != K.shape[1]:
        raise DimensionError(f"{name} must be square, got shape {K.shape}")
    scale = np.abs(K).max()
    if scale == 0 or not np.all(np.abs(K - K.T) <= 1e-10 * scale):
        raise KernelError(f"kernel not positive definite: {name} is not symmetric")
    evals = sla.eigvalsh(K, check_finite=False)
    if evals[0] <= 1e-12 * evals[-1]:
        raise KernelError(
            f"kernel not positive definite: {name} has eigenvalue ratio "
            f"{evals[0] / evals[-1]:.3e}"
        )


def cholesky_factor(K: np.ndarray, name: str = "kernel") -> np.ndarray:
    """Upper-triangular R with K = R^T R, ridge-jittering once on failure."""
    try:
        return sla.cholesky(K, lower=False, check_finite=False)
    except sla.LinAlgError:
        jitter = CHOL_JITTER * np.trace(K) / K.shape[0]
        try:
            return sla.cholesky(
                K + jitter * np.eye(K.shape[0]), lower=False, check_finite=False
            )
        except sla.LinAlgError as exc:
            raise KernelError(f"kernel not positive definite: {name}") from exc


@dataclass(frozen=True)
class TwoWayDataset:
    """Design matrix X together with its row kernel H and column kernel Q.

    Rows of X are samples, columns are variables.  H (n x n) encodes
    conditional sample similarity, Q (p x p) conditional variable
    similarity; both must be SPD.  ``y`` is an optional response.

    Set ``validate=False`` only on internally constructed, already-checked
    data (e.g. leave-one-out subsets in hot loops).
    """

    X: np.ndarray
    H: np.ndarray
    Q: np.ndarray
    y: np.ndarray | None = None
    validate: bool = field(default=True, repr=False)

    def __post_init__(self):
        object.__setattr__(self, "X", np.asarray(self.X, dtype=float))
        object.__setattr__(self, "H", np.asarray(self.H, dtype=float))
        object.__setattr__(self, "Q", np.asarray(self.Q, dtype=float))
        if self.y is not None:
            object.__setattr__(self, "y", np.asarray(self.y, dtype=float).ravel())
        n, p = self.X.shape
        if self.H.shape != (n, n):
            raise DimensionError(f"H has shape {self.H.shape}, expected ({n}, {n})")
        if self.Q.shape != (p, p):
            raise DimensionError(f"Q has shape {self.Q.shape}, expected ({p}, {p})")
        if self.y is not None and self.y.shape != (n,):
            raise DimensionError(f"y has length {self.y.shape[0]}, expected {n}")
        if self.validate:
            _check_spd(self.H, "H")
            _check_spd(self.Q, "Q")

    @property
    def n(self) -> int:
        return self.X.shape[0]

    @property
    def p(self) -> int:
        return self.X.shape[1]


@dataclass(frozen=True)
class GmdFactors:
    """GMD triple (U, S, V) of rank K.

    ``s`` holds the positive GMD values in nonincreasing order; U is
    n x K with U^T H U = I and V is p x K with V^T Q V = I.
    """

    U: np.ndarray
    s: np.ndarray
    V: np.ndarray

    @property
    def K(self) -> int:
        return self.s.shape[0]


def hq_norm(M: np.ndarray, H: np.ndarray, Q: np.ndarray) -> float:
    """(H, Q)-weighted norm sqrt(tr(M^T H M Q)); zero iff M = 0."""
    M = np.asarray(M, dtype=float)
    n, p = M.shape
    if H.shape != (n, n) or Q.shape != (p, p):
        raise DimensionError(
            f"hq_norm: M is {M.shape}, H is {H.shape}, Q is {Q.shape}"
        )
    val = float(np.einsum("ij,ik,kl,lj->", M, H, M, Q, optimize=True))
    return float(np.sqrt(max(val, 0.0)))


def center_hq(data: TwoWayDataset) -> TwoWayDataset:
    """H-weighted centering of the response and every column of X.

    Subtracts the H-weighted mean (1^T H v) / (1^T H 1) from y and each
    column, so that 1^T H y = 0 and 1^T H X = 0 afterwards.

    When the ones vector is (numerically) in the null space of H, the
    weighted mean is the ratio of two near-zero quantities and can be
    arbitrarily far from the data; the shift is then also irrelevant to
    any H-weighted quantity.  In that degenerate case the ordinary means
    are subtracted instead.
    """
    h1 = data.H.sum(axis=0)  # 1^T H
    denom = h1.sum()  # 1^T H 1 > 0 for SPD H
    trace = float(np.trace(data.H))
    if trace <= 0:
        raise KernelError("kernel not positive semi-definite: trace <= 0")
    if denom < 1e-4 * trace:
        # intercept unidentified under H: fall back to ordinary means
        h1 = np.ones(data.n)
        denom = float(data.n)
    X = data.X - np.outer(np.ones(data.n), h1 @ data.X / denom)
    y = None
    if data.y is not None:
        y = data.y - (h1 @ data.y / denom)
    return replace(data, X=X, y=y, validate=False)


def standardize_columns(data: TwoWayDataset) -> tuple[TwoWayDataset, np.ndarray]:
    """Scale each column of X to H-norm^2 = n.

    Returns the scaled dataset and the scale vector s with
    s_j = |x_j|_H / sqrt(n); the fitted coefficients for the original
    columns are the standardized ones divided by s.
    """
    norms2 = np.einsum("ij,ik,kj->j", data.X, data.H, data.X, optimize=True)
    bad = np.flatnonzero(norms2 <= 0)
    if bad.size:
        raise DegenerateInputError(f"column {bad[0]} has zero H-norm")
    scales = np.sqrt(norms2 / data.n)
    return replace(data, X=data.X / scales, validate=False), scales


def gmd(
    data: TwoWayDataset,
    rank_request: int | None = None,
    rank_tol: float = RANK_TOL,
) -> GmdFactors:
    """Generalized matrix decomposition of X with respect to (H, Q).

    Components are ordered by nonincreasing GMD value; values below
    ``rank_tol * sigma_1`` are dropped.  ``rank_request`` caps the rank.
    """
    if data.X.size == 0:
        raise DegenerateInputError("empty design matrix")
    if rank_request is not None and rank_request > min(data.n, data.p):
        raise DimensionError(
            f"rank_request {rank_request} exceeds min(n, p) = {min(data.n, data.p)}"
        )
    Lh = cholesky_factor(data.H, "H")
    Lq = cholesky_factor(data.Q, "Q")
    W = Lh @ data.X @ Lq.T
    Uw, s, Vwt = sla.svd(W, full_matrices=False, check_finite=False,
                         lapack_driver="gesdd")
    K = int(np.sum(s > rank_tol * s[0])) if s.size and s[0] > 0 else 0
    if K == 0:
        raise DegenerateInputError("design matrix has numeric rank zero")
    if rank_request is not None:
        K = min(K, rank_request)
    U = sla.solve_triangular(Lh, Uw[:, :K], lower=False, check_finite=False)
    V = sla.solve_triangular(Lq, Vwt[:K].T, lower=False, check_finite=False)
    return GmdFactors(U=U, s=s[:K].copy(), V=V)
