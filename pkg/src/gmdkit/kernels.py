"""Kernel construction helpers and informativeness screens.

A candidate row kernel H (or column kernel Q) encodes *conditional*
similarity, so the screens compare its inverse against the empirical
Gram structure of the data.  Two permutation tests are provided:

* KRV: normalized trace inner product of two Gower-centered kernels,
  permuting one kernel's rows/columns jointly.
* A kernel score test for a response ("mirkat"): yt^T Ktilde yt / yt^T yt
  with permuted response entries under the null.

Both p-values use the add-one Monte Carlo estimate
(1 + #{permuted >= observed}) / (1 + B), reproducible under a fixed seed.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.linalg as sla

from .exceptions import DegenerateInputError, DimensionError, GmdkitError


@dataclass(frozen=True)
class KernelTestResult:
    statistic: float
    p_value: float
    n_permutations: int
    seed: int

    def to_dict(self) -> dict:
        return {
            "statistic": self.statistic,
            "p_value": self.p_value,
            "n_permutations": self.n_permutations,
            "seed": self.seed,
        }


def gower_center(K: np.ndarray) -> np.ndarray:
    """Double centering C K C with C = I - m^{-1} 1 1^T; idempotent."""
    K = np.asarray(K, dtype=float)
    if K.ndim != 2 or K.shape[0] != K.shape[1]:
        raise DimensionError(f"expected a square matrix, got {K.shape}")
    row = K.mean(axis=1, keepdims=True)
    col = K.mean(axis=0, keepdims=True)
    return K - row - col + K.mean()


def _centered_inverse(Kstruct: np.ndarray) -> np.ndarray:
    """Gower-centered inverse of an SPD structure kernel."""
    try:
        Kinv = sla.inv(Kstruct, check_finite=False)
    except sla.LinAlgError as exc:
        raise GmdkitError("structure kernel is singular") from exc
    return gower_center(Kinv)


def krv(
    Kx: np.ndarray, Kstruct: np.ndarray, B: int = 999, seed: int = 0
) -> KernelTestResult:
    """Kernel RV association test between a data Gram matrix and a structure.

    The statistic is tr(Kx~ Ks~) / sqrt(tr(Kx~^2) tr(Ks~^2)) where Kx~ is
    the centered data kernel and Ks~ the centered *inverse* of the
    structure kernel.  The null is simulated by permuting the rows and
    columns of Kx~ jointly.
    """
    if B < 1:
        raise GmdkitError("need at least one permutation")
    if Kx.shape != Kstruct.shape:
        raise DimensionError(f"kernel shapes differ: {Kx.shape} vs {Kstruct.shape}")
    Kxc = gower_center(np.asarray(Kx, dtype=float))
    Ksc = _centered_inverse(np.asarray(Kstruct, dtype=float))
    nx = float(np.sum(Kxc * Kxc))
    ns = float(np.sum(Ksc * Ksc))
    if nx == 0.0 or ns == 0.0:
        raise DegenerateInputError("a kernel is centered to zero")
    denom = np.sqrt(nx * ns)
    observed = float(np.sum(Kxc * Ksc)) / denom
    rng = np.random.default_rng(seed)
    m = Kx.shape[0]
    count = 0
    for _ in range(B):
        perm = rng.permutation(m)
        stat = float(np.sum(Kxc[np.ix_(perm, perm)] * Ksc)) / denom
        if stat >= observed:
            count += 1
    return KernelTestResult(
        statistic=observed, p_value=(1 + count) / (1 + B),
        n_permutations=B, seed=seed,
    )


def mirkat(
    y: np.ndarray, Kstruct: np.ndarray, B: int = 999, seed: int = 0
) -> KernelTestResult:
    """Permutation score test of association between y and a row structure.

    T = yt^T Ktilde yt / (yt^T yt) with Ktilde the centered inverse of the
    structure kernel and yt the mean-centered response; the null permutes
    the entries of yt.
    """
    if B < 1:
        raise GmdkitError("need at least one permutation")
    y = np.asarray(y, dtype=float).ravel()
    if Kstruct.shape != (y.size, y.size):
        raise DimensionError(
            f"kernel is {Kstruct.shape}, response has length {y.size}"
        )
    yt = y - y.mean()
    ss = float(yt @ yt)
    if ss == 0.0:
        raise DegenerateInputError("constant response")
    Kt = _centered_inverse(np.asarray(Kstruct, dtype=float))
    observed = float(yt @ (Kt @ yt)) / ss
    rng = np.random.default_rng(seed)
    perms = np.array([rng.permutation(y.size) for _ in range(B)])
    Y = yt[perms]  # (B, n)
    stats = np.einsum("bi,bi->b", Y @ Kt, Y) / ss
    count = int(np.sum(stats >= observed))
    return KernelTestResult(
        statistic=observed, p_value=(1 + count) / (1 + B),
        n_permutations=B, seed=seed,
    )


def kernel_from_sq_distance(D2: np.ndarray, jitter: float = 1e-10) -> np.ndarray:
    """SPD row kernel from a squared-distance matrix.

    Forms the Gower-centered Gram matrix -0.5 * C D2 C, ridge-jitters it
    to positive definiteness (the centered Gram is always singular along
    the ones vector), and inverts.
    """
    D2 = np.asarray(D2, dtype=float)
    if not np.any(D2):
        raise DegenerateInputError("degenerate distances: all zero")
    G = -0.5 * gower_center(D2)
    evals = sla.eigvalsh(G, check_finite=False)
    if evals[-1] <= 0:
        raise DegenerateInputError("degenerate distances: centered Gram not PSD")
    bump = jitter * np.trace(G) / G.shape[0] + max(-evals[0], 0.0)
    G = G + bump * np.eye(G.shape[0])
    return sla.inv(G, check_finite=False)


def inverse_euclidean_kernel(Z: np.ndarray, jitter: float = 1e-10) -> np.ndarray:
    """Row kernel n * (Z Z^T)^{-1} from an auxiliary feature matrix."""
    Z = np.asarray(Z, dtype=float)
    n = Z.shape[0]
    G = Z @ Z.T
    try:
        return n * sla.inv(G, check_finite=False)
    except sla.LinAlgError:
        bump = jitter * np.trace(G) / n
        try:
            return n * sla.inv(G + bump * np.eye(n), check_finite=False)
        except sla.LinAlgError as exc:
            raise DegenerateInputError(
                "Z Z^T is singular; need at least n independent features"
            ) from exc


def clr_transform(counts: np.ndarray, pseudocount: float = 1.0) -> np.ndarray:
    """Row-wise centered log-ratio transform of nonnegative count data.

    Adds ``pseudocount`` to every entry first; each output row sums to
    zero.
    """
    Z = np.asarray(counts, dtype=float) + pseudocount
    if np.any(Z <= 0):
        raise DegenerateInputError(
            "nonpositive entries after pseudocount; increase pseudocount"
        )
    logZ = np.log(Z)
    return logZ - logZ.mean(axis=1, keepdims=True)
