"""Shared construction helpers for the test suite."""

import numpy as np


def rand_spd(rng, m, diag_boost=0.5):
    """Random well-conditioned SPD matrix of size m."""
    A = rng.standard_normal((m, m))
    return A @ A.T / m + diag_boost * np.eye(m)


def rand_dataset(rng, n, p, with_y=True, snr=1.0):
    """Random design with SPD row/column kernels and a Gaussian response."""
    from gmdkit import TwoWayDataset

    X = rng.standard_normal((n, p))
    H = rand_spd(rng, n)
    Q = rand_spd(rng, p)
    y = None
    if with_y:
        beta = rng.standard_normal(p)
        y = X @ beta * snr + rng.standard_normal(n)
    return TwoWayDataset(X=X, H=H, Q=Q, y=y)


def gmd_residuals(factors, X, H, Q):
    """Max violations of the three decomposition identities."""
    U, s, V = factors.U, factors.s, factors.V
    e_orth_u = np.abs(U.T @ H @ U - np.eye(factors.K)).max()
    e_orth_v = np.abs(V.T @ Q @ V - np.eye(factors.K)).max()
    e_recon = np.abs(X - (U * s) @ V.T).max()
    return e_orth_u, e_orth_v, e_recon
