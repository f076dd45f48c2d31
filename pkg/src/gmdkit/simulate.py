"""Synthetic data generators and experiment drivers.

Four named settings cover the main benchmark grid:

* I   — iid rows, block-AR column precision; response from the top
        eigenvectors of the column structure; noise scaled to a target R^2.
* II  — Setting I data scored against perturbed column structures
        (q1: mildly perturbed cross-block entries; q2: uninformative).
* III — correlated rows; six candidate row structures h1..h6 of varying
        informativeness for the KRV/response screens.
* IV  — correlated rows with partially informative H(theta) built by
        truncating the eigenvalue mass of the row covariance.

A fifth, "perturbed", mimics the data-driven design: kernels from random
point clouds and a noise covariance whose whitened mismatch with H is
exactly delta.

All replicate streams are derived deterministically from
(master seed, replicate index).
"""

from __future__ import annotations

import json
from dataclasses import asdict, dataclass, field
from functools import lru_cache

import numpy as np
import scipy.linalg as sla

from .estimators import _loocv_predictions
from .exceptions import DegenerateInputError, GmdkitError
from .inference import run_gmdi
from .kernels import kernel_from_sq_distance, krv, mirkat
from .linalg import TwoWayDataset, cholesky_factor
from .robust import run_robust_gmdi


@dataclass(frozen=True)
class NoiseModel:
    """Noise covariance Psi with a factor Psi = L^T L and the error family."""

    psi: np.ndarray
    l_psi: np.ndarray
    family: str = "gaussian"

    def sample(self, rng: np.random.Generator) -> np.ndarray:
        return self.l_psi.T @ rng.standard_normal(self.psi.shape[0])


@dataclass(frozen=True)
class SettingSpec:
    """Configuration of one named simulation setting."""

    setting: str
    n: int = 200
    p: int = 300
    r_squared: float | None = None
    delta: float | None = None
    theta: float | None = None
    q_variant: str | None = None
    h_variant: str | None = None
    replicates: int = 100
    seed: int = 0


@dataclass(frozen=True)
class SimulationReport:
    """Aggregated per-method metrics over the replicates of one setting."""

    config: dict
    metrics: dict[str, dict[str, list[float]]]
    summary: dict[str, dict[str, dict[str, float]]] = field(default_factory=dict)

    def to_dict(self) -> dict:
        return {"config": self.config, "metrics": self.metrics,
                "summary": self.summary}

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), sort_keys=True)


# ---------------------------------------------------------------------------
# Closed-form kernel matrices
# ---------------------------------------------------------------------------


def block_ar_matrix(
    size: int,
    split: int,
    rho1: float,
    rho2: float,
    cross: float | None = None,
) -> np.ndarray:
    """Two diagonal blocks with entries rho^{|i-j|}; unit diagonal.

    ``cross`` fills the off-block rectangle with cross^{|i-j|} (zero when
    None).
    """
    idx = np.arange(size)
    absdiff = np.abs(idx[:, None] - idx[None, :])
    M = np.zeros((size, size))
    b1 = idx < split
    M[np.ix_(b1, b1)] = rho1 ** absdiff[np.ix_(b1, b1)]
    M[np.ix_(~b1, ~b1)] = rho2 ** absdiff[np.ix_(~b1, ~b1)]
    if cross is not None:
        M[np.ix_(b1, ~b1)] = cross ** absdiff[np.ix_(b1, ~b1)]
        M[np.ix_(~b1, b1)] = cross ** absdiff[np.ix_(~b1, b1)]
    np.fill_diagonal(M, 1.0)
    return M


def column_structure_variant(name: str, p: int) -> np.ndarray:
    """Named column structures: the true precision and its perturbations."""
    split = p // 2
    if name in ("true", "sigma_inv"):
        return block_ar_matrix(p, split, 0.9, 0.5)
    if name == "q1":
        return block_ar_matrix(p, split, 0.9, 0.5, cross=0.1)
    if name == "q2":
        return 0.9 * np.eye(p) + 0.1 * np.ones((p, p))
    raise GmdkitError(f"unknown column structure variant {name!r}")


def row_structure_variant(name: str, n: int) -> np.ndarray:
    """Named row structures h1..h6 of decreasing informativeness."""
    split = n // 2
    idx = np.arange(n)
    absdiff = np.abs(idx[:, None] - idx[None, :])
    if name == "h1":
        return block_ar_matrix(n, split, 0.9, 0.5)
    if name == "h2":
        return block_ar_matrix(n, split, 0.9, 0.5, cross=0.1)
    if name == "h3":
        return block_ar_matrix(n, split, -0.4, -0.8)
    if name in ("h4", "h5"):
        top = split if name == "h4" else n // 10
        fill = 0.002 if name == "h4" else 0.005
        M = ((-1.0) ** absdiff) * fill
        b = idx < top
        M[np.ix_(b, b)] = 0.9 ** absdiff[np.ix_(b, b)]
        np.fill_diagonal(M, 1.0)
        return M
    if name == "h6":
        return (-0.5) ** absdiff
    raise GmdkitError(f"unknown row structure variant {name!r}")


@lru_cache(maxsize=32)
def _setting_matrices(n: int, p: int) -> dict:
    """Shared per-setting matrices: precisions, covariances, signal basis.

    The top eigenvectors of the column precision are computed per block so
    that their support is exactly one block; the coefficients outside the
    signal block are exactly zero by construction.
    """
    if p < 10:
        raise GmdkitError("named settings need p >= 10 for the signal basis")
    split = p // 2
    q_true = column_structure_variant("true", p)
    sigma = sla.inv(q_true, check_finite=False)
    # blockwise eigenvectors of the column precision, merged and sorted
    evals1, evecs1 = sla.eigh(q_true[:split, :split], check_finite=False)
    evals2, evecs2 = sla.eigh(q_true[split:, split:], check_finite=False)
    evals = np.concatenate([evals1, evals2])
    vecs = np.zeros((p, p))
    vecs[:split, :split] = evecs1
    vecs[split:, split:] = evecs2
    order = np.argsort(evals)[::-1]
    f = vecs[:, order]  # descending eigenvectors of q_true, exact support
    beta_star = f[:, :10] @ (np.arange(1, 11) ** -0.5)
    r_prec = block_ar_matrix(n, n // 2, 0.9, 0.5)
    r_cov = sla.inv(r_prec, check_finite=False)
    return {
        "q_true": q_true, "sigma": sigma, "beta_star": beta_star,
        "r_prec": r_prec, "r_cov": r_cov,
    }


# ---------------------------------------------------------------------------
# Samplers and signal constructors
# ---------------------------------------------------------------------------


def matrix_variate_normal(
    n: int,
    p: int,
    R: np.ndarray,
    Sigma: np.ndarray,
    seed: int | np.random.Generator = 0,
) -> np.ndarray:
    """Sample X with Cov(vec X) = Sigma (x) R via X = L_R^T Z L_S."""
    rng = np.random.default_rng(seed) if not isinstance(
        seed, np.random.Generator) else seed
    Lr = cholesky_factor(R, "R")
    Ls = cholesky_factor(Sigma, "Sigma")
    return Lr.T @ rng.standard_normal((n, p)) @ Ls


def hard_threshold(x: np.ndarray, tau: float) -> np.ndarray:
    """s(x, tau) = x * 1(|x| > tau), elementwise."""
    x = np.asarray(x, dtype=float)
    return np.where(np.abs(x) > tau, x, 0.0)


def eigvec_signal(
    Q: np.ndarray, coefficients: np.ndarray, threshold: float
) -> np.ndarray:
    """Thresholded combination of the top eigenvectors of Q."""
    coefficients = np.asarray(coefficients, dtype=float)
    evals, evecs = sla.eigh(Q, check_finite=False)
    top = evecs[:, ::-1][:, : coefficients.size]
    return hard_threshold(top @ coefficients, threshold)


def perturbed_noise(H: np.ndarray, delta: float) -> NoiseModel:
    """Noise covariance whose whitened mismatch with H equals delta.

    Psi = sum_j (1/ev_j + delta/ev_1) d_j d_j^T from the eigendecomposition
    of H; the construction is verified by recomputing
    |L_psi H L_psi^T - I|_2.
    """
    if delta < 0:
        raise GmdkitError("delta must be nonnegative")
    evals, evecs = sla.eigh(H, check_finite=False)
    ev1 = evals[-1]
    psi_evals = 1.0 / evals + delta / ev1
    psi = (evecs * psi_evals) @ evecs.T
    l_psi = (evecs * np.sqrt(psi_evals)) @ evecs.T  # symmetric sqrt
    mismatch = np.abs(
        sla.eigvalsh(l_psi @ H @ l_psi.T, check_finite=False) - 1.0
    ).max()
    if abs(mismatch - delta) > 1e-6 * max(delta, 1.0):
        raise GmdkitError(
            f"noise construction failed: mismatch {mismatch:.3e} != {delta}"
        )
    return NoiseModel(psi=psi, l_psi=l_psi)


def build_setting(
    spec: SettingSpec, rng: np.random.Generator | None = None
) -> tuple[TwoWayDataset, np.ndarray, np.ndarray]:
    """Materialize one replicate of a named setting.

    Returns (dataset, beta_star, truth_mask); truth_mask marks the non-zero
    coordinates of beta_star.
    """
    if rng is None:
        rng = np.random.default_rng(spec.seed)
    n, p = spec.n, spec.p
    if spec.setting in ("I", "II"):
        mats = _setting_matrices(n, p)
        X = matrix_variate_normal(n, p, np.eye(n), mats["sigma"], rng)
        beta_star = mats["beta_star"]
        signal = X @ beta_star
        if spec.r_squared is None:
            raise GmdkitError("settings I/II need a target r_squared")
        sigma_eps2 = np.var(signal) * (1.0 / spec.r_squared - 1.0)
        y = signal + rng.standard_normal(n) * np.sqrt(sigma_eps2)
        Q = (
            mats["q_true"]
            if spec.setting == "I"
            else column_structure_variant(spec.q_variant or "q1", p)
        )
        data = TwoWayDataset(X=X, H=np.eye(n), Q=Q, y=y, validate=False)
    elif spec.setting == "III":
        mats = _setting_matrices(n, p)
        X = matrix_variate_normal(n, p, mats["r_cov"], mats["sigma"], rng)
        beta_star = 5.0 * mats["beta_star"]
        eps = cholesky_factor(mats["r_cov"], "R").T @ rng.standard_normal(n)
        y = X @ beta_star + eps
        H = row_structure_variant(spec.h_variant or "h1", n)
        data = TwoWayDataset(X=X, H=H, Q=mats["q_true"], y=y, validate=False)
    elif spec.setting == "IV":
        mats = _setting_matrices(n, p)
        X = matrix_variate_normal(n, p, mats["r_cov"], mats["sigma"], rng)
        beta_star = 10.0 * mats["beta_star"]
        eps = cholesky_factor(mats["r_cov"], "R").T @ rng.standard_normal(n)
        y = X @ beta_star + eps
        H = partial_row_structure(mats["r_cov"], spec.theta or 1.0)
        data = TwoWayDataset(X=X, H=H, Q=mats["q_true"], y=y, validate=False)
    elif spec.setting == "perturbed":
        # sqrt of Euclidean distance is of negative type, so the centered
        # kernel is full rank; the jitter keeps its inverse well conditioned
        H = kernel_from_sq_distance(_point_cloud_sqdist(n, rng), jitter=1e-3)
        Q = kernel_from_sq_distance(_point_cloud_sqdist(p, rng), jitter=1e-3)
        X = matrix_variate_normal(
            n, p, sla.inv(H, check_finite=False),
            sla.inv(Q, check_finite=False), rng,
        )
        coefs = 5.0 * (2.0 + 3.0 * np.arange(10)) ** -0.5
        beta_star = eigvec_signal(Q, coefs, 0.1)
        noise = perturbed_noise(H, spec.delta if spec.delta is not None else 0.0)
        y = X @ beta_star + noise.sample(rng)
        data = TwoWayDataset(X=X, H=H, Q=Q, y=y, validate=False)
    else:
        raise GmdkitError(f"unknown setting {spec.setting!r}")
    return data, beta_star, beta_star != 0


def partial_row_structure(R: np.ndarray, theta: float) -> np.ndarray:
    """H(theta): inverse of R truncated to its top eigenvalue mass.

    k(theta) is the smallest integer whose leading eigenvalue mass ratio
    reaches theta; H(1) equals R^{-1}.  For theta < 1 the result is
    singular (positive semi-definite) by construction.
    """
    if not 0.0 < theta <= 1.0:
        raise GmdkitError("theta must be in (0, 1]")
    evals, evecs = sla.eigh(R, check_finite=False)
    evals, evecs = evals[::-1], evecs[:, ::-1]
    k = int(np.searchsorted(np.cumsum(evals) / np.sum(evals), theta) + 1)
    k = min(k, evals.size)
    return (evecs[:, :k] / evals[:k]) @ evecs[:, :k].T


def _point_cloud_sqdist(m: int, rng: np.random.Generator, dim: int = 3):
    """Square-root Euclidean distances of a random cloud, as a 'D^2' input."""
    Z = rng.standard_normal((m, dim))
    sq = np.sum(Z**2, axis=1)
    d2 = np.maximum(sq[:, None] + sq[None, :] - 2.0 * Z @ Z.T, 0.0)
    return np.sqrt(d2)


# ---------------------------------------------------------------------------
# Experiment driver
# ---------------------------------------------------------------------------

KNOWN_METHODS = (
    "gmdi-d", "gmdi-k", "r-gmdi-d", "r-gmdi-k",
    "krv-h", "krv-q", "mirkat-h", "rmse-vi", "rmse-top",
)


def _replicate_metrics(
    spec: SettingSpec,
    methods: list[str],
    alpha: float,
    b_permutations: int,
    rep: int,
) -> dict[str, dict[str, float]]:
    rng = np.random.default_rng([spec.seed, rep])
    data, _, truth = build_setting(spec, rng)
    out: dict[str, dict[str, float]] = {}
    reports = {}
    for name in methods:
        if name in ("gmdi-d", "gmdi-k", "r-gmdi-d", "r-gmdi-k"):
            estimator = "gmdr" if name.endswith("-d") else "kpr"
            if name.startswith("r-"):
                rep_obj = run_robust_gmdi(data, estimator=estimator, seed=rep)
            else:
                rep_obj = run_gmdi(data, estimator=estimator, seed=rep)
            reports[name] = rep_obj
            reject = rep_obj.p_value <= alpha
            out[name] = {
                "type1": float(np.mean(reject[~truth])) if np.any(~truth) else 0.0,
                "power": float(np.mean(reject[truth])) if np.any(truth) else 0.0,
            }
        elif name == "krv-h":
            res = krv(data.X @ data.X.T, data.H, B=b_permutations, seed=rep)
            out[name] = {"significant": float(res.p_value <= alpha)}
        elif name == "krv-q":
            res = krv(data.X.T @ data.X, data.Q, B=b_permutations, seed=rep)
            out[name] = {"significant": float(res.p_value <= alpha)}
        elif name == "mirkat-h":
            res = mirkat(data.y, data.H, B=b_permutations, seed=rep)
            out[name] = {"significant": float(res.p_value <= alpha)}
        elif name in ("rmse-vi", "rmse-top"):
            if f"rmse::{rep}" not in reports:
                preds = _loocv_predictions(data, "gmdr", selectors=("vi", "top"))
                reports[f"rmse::{rep}"] = preds
            preds = reports[f"rmse::{rep}"]
            sel = "vi" if name == "rmse-vi" else "top"
            ynorm2 = float(data.y @ data.y)
            out[name] = {
                "rmse": float(np.sum((data.y - preds[sel]) ** 2) / ynorm2)
            }
        else:
            raise GmdkitError(f"unknown method {name!r}")
    return out


def run_experiment(
    spec: SettingSpec,
    methods: list[str],
    alpha: float = 0.05,
    b_permutations: int = 999,
) -> SimulationReport:
    """Loop the replicates of a setting and aggregate per-method metrics.

    Replicate r uses the deterministic stream seeded by (spec.seed, r);
    aggregation is order-free, so results do not depend on scheduling.
    """
    if not methods:
        raise GmdkitError("empty methods list")
    metrics: dict[str, dict[str, list[float]]] = {m: {} for m in methods}
    for rep in range(spec.replicates):
        try:
            rep_out = _replicate_metrics(spec, methods, alpha, b_permutations, rep)
        except GmdkitError as exc:
            raise GmdkitError(f"replicate {rep}: {exc}") from exc
        for name, vals in rep_out.items():
            for key, val in vals.items():
                metrics[name].setdefault(key, []).append(val)
    summary = {
        name: {
            key: {"mean": float(np.mean(vals)), "sd": float(np.std(vals, ddof=1))
                  if len(vals) > 1 else 0.0}
            for key, vals in per.items()
        }
        for name, per in metrics.items()
    }
    return SimulationReport(config=asdict(spec), metrics=metrics, summary=summary)
