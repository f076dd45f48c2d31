import numpy as np
import pytest
import scipy.linalg as sla
from hypothesis import given, settings
from hypothesis import strategies as st

from gmdkit import TwoWayDataset, center_hq, gmd, hq_norm, standardize_columns
from gmdkit.exceptions import (
    DegenerateInputError,
    DimensionError,
    KernelError,
)
from gmdkit.linalg import GmdFactors, cholesky_factor

from helpers import gmd_residuals, rand_spd

# Hand-worked 3x2 example: with X = [[1,0],[0,1],[1,1]], H = diag(1,2,1),
# Q = diag(2,1) the matrix X^T H X Q = [[4,1],[2,3]] has characteristic
# polynomial t^2 - 7t + 10 = (t-5)(t-2), so the decomposition values are
# sqrt(5) and sqrt(2).
X_SMALL = np.array([[1.0, 0.0], [0.0, 1.0], [1.0, 1.0]])
H_SMALL = np.diag([1.0, 2.0, 1.0])
Q_SMALL = np.diag([2.0, 1.0])


def small_dataset():
    return TwoWayDataset(X=X_SMALL, H=H_SMALL, Q=Q_SMALL)


class TestGmdValues:
    def test_values_match_characteristic_polynomial(self):
        f = gmd(small_dataset())
        assert np.allclose(f.s, [np.sqrt(5.0), np.sqrt(2.0)], atol=1e-12)

    def test_factor_identities_on_small_example(self):
        f = gmd(small_dataset())
        eu, ev, er = gmd_residuals(f, X_SMALL, H_SMALL, Q_SMALL)
        assert max(eu, ev, er) < 1e-12

    def test_identity_kernels_reduce_to_svd(self):
        rng = np.random.default_rng(3)
        X = rng.standard_normal((7, 5))
        f = gmd(TwoWayDataset(X=X, H=np.eye(7), Q=np.eye(5)))
        s_ref = np.linalg.svd(X, compute_uv=False)
        assert np.allclose(f.s, s_ref, atol=1e-12)

    def test_scaling_x_scales_values_linearly(self):
        f1 = gmd(small_dataset())
        f3 = gmd(TwoWayDataset(X=3.0 * X_SMALL, H=H_SMALL, Q=Q_SMALL))
        assert np.allclose(f3.s, 3.0 * f1.s, atol=1e-12)

    def test_scaling_kernels_scales_values_by_sqrt(self):
        f1 = gmd(small_dataset())
        fh = gmd(TwoWayDataset(X=X_SMALL, H=4.0 * H_SMALL, Q=Q_SMALL))
        fq = gmd(TwoWayDataset(X=X_SMALL, H=H_SMALL, Q=0.25 * Q_SMALL))
        assert np.allclose(fh.s, 2.0 * f1.s, atol=1e-12)
        assert np.allclose(fq.s, 0.5 * f1.s, atol=1e-12)

    def test_squared_values_sum_to_weighted_norm(self):
        rng = np.random.default_rng(11)
        X = rng.standard_normal((8, 6))
        H, Q = rand_spd(rng, 8), rand_spd(rng, 6)
        f = gmd(TwoWayDataset(X=X, H=H, Q=Q))
        assert np.isclose(np.sum(f.s**2), hq_norm(X, H, Q) ** 2, rtol=1e-10)

    def test_identities_hold_on_random_instances(self):
        rng = np.random.default_rng(0)
        for i in range(25):
            n, p = rng.integers(2, 12, size=2)
            X = rng.standard_normal((n, p))
            H, Q = rand_spd(rng, n), rand_spd(rng, p)
            f = gmd(TwoWayDataset(X=X, H=H, Q=Q))
            assert max(gmd_residuals(f, X, H, Q)) < 1e-9
            assert np.all(np.diff(f.s) <= 1e-12)  # nonincreasing

    def test_rank_request_truncates(self):
        f = gmd(small_dataset(), rank_request=1)
        assert f.K == 1 and np.isclose(f.s[0], np.sqrt(5.0))

    def test_rank_request_too_large_raises(self):
        with pytest.raises(DimensionError):
            gmd(small_dataset(), rank_request=3)

    def test_rank_deficient_design_drops_null_directions(self):
        X = np.array([[1.0, 2.0], [2.0, 4.0], [3.0, 6.0]])  # rank 1
        f = gmd(TwoWayDataset(X=X, H=np.eye(3), Q=np.eye(2)))
        assert f.K == 1

    def test_zero_design_raises(self):
        with pytest.raises(DegenerateInputError):
            gmd(TwoWayDataset(X=np.zeros((3, 2)), H=np.eye(3), Q=np.eye(2)))


class TestKernelValidation:
    def test_asymmetric_kernel_rejected(self):
        H = np.array([[1.0, 0.5], [0.0, 1.0]])
        with pytest.raises(KernelError):
            TwoWayDataset(X=np.ones((2, 2)), H=H, Q=np.eye(2))

    def test_indefinite_kernel_rejected(self):
        H = np.array([[1.0, 2.0], [2.0, 1.0]])  # eigenvalues 3, -1
        with pytest.raises(KernelError):
            TwoWayDataset(X=np.ones((2, 2)), H=H, Q=np.eye(2))

    def test_shape_mismatch_rejected(self):
        with pytest.raises(DimensionError):
            TwoWayDataset(X=np.ones((3, 2)), H=np.eye(2), Q=np.eye(2))
        with pytest.raises(DimensionError):
            TwoWayDataset(X=np.ones((3, 2)), H=np.eye(3), Q=np.eye(3))
        with pytest.raises(DimensionError):
            TwoWayDataset(X=np.ones((3, 2)), H=np.eye(3), Q=np.eye(2),
                          y=np.ones(4))

    def test_cholesky_factor_reconstructs(self):
        rng = np.random.default_rng(5)
        K = rand_spd(rng, 6)
        R = cholesky_factor(K)
        assert np.allclose(R.T @ R, K, atol=1e-12)
        assert np.allclose(R, np.triu(R))

    def test_cholesky_jitters_borderline_psd(self):
        v = np.ones(4)
        K = np.outer(v, v) + 1e-14 * np.eye(4)  # numerically singular
        R = cholesky_factor(K)
        assert np.all(np.isfinite(R))


class TestWeightedNorm:
    def test_matches_elementwise_quadruple_sum(self):
        rng = np.random.default_rng(7)
        M = rng.standard_normal((4, 3))
        H, Q = rand_spd(rng, 4), rand_spd(rng, 3)
        acc = 0.0
        for i in range(4):
            for k in range(4):
                for j in range(3):
                    for l in range(3):
                        acc += M[i, j] * H[i, k] * M[k, l] * Q[l, j]
        assert np.isclose(hq_norm(M, H, Q), np.sqrt(acc), rtol=1e-12)

    def test_zero_only_at_zero_matrix(self):
        rng = np.random.default_rng(9)
        H, Q = rand_spd(rng, 3), rand_spd(rng, 2)
        assert hq_norm(np.zeros((3, 2)), H, Q) == 0.0
        assert hq_norm(rng.standard_normal((3, 2)), H, Q) > 0.0

    def test_shape_mismatch_raises(self):
        with pytest.raises(DimensionError):
            hq_norm(np.ones((3, 2)), np.eye(2), np.eye(2))


class TestCenteringAndScaling:
    def test_centering_zeroes_weighted_column_sums(self):
        rng = np.random.default_rng(13)
        data = TwoWayDataset(
            X=rng.standard_normal((6, 4)) + 5.0,
            H=rand_spd(rng, 6), Q=rand_spd(rng, 4),
            y=rng.standard_normal(6) + 2.0,
        )
        c = center_hq(data)
        h1 = data.H.sum(axis=0)
        assert np.abs(h1 @ c.X).max() < 1e-10
        assert abs(h1 @ c.y) < 1e-10

    def test_centering_is_idempotent(self):
        rng = np.random.default_rng(14)
        data = TwoWayDataset(
            X=rng.standard_normal((5, 3)), H=rand_spd(rng, 5),
            Q=rand_spd(rng, 3), y=rng.standard_normal(5),
        )
        once = center_hq(data)
        twice = center_hq(once)
        assert np.allclose(once.X, twice.X, atol=1e-12)
        assert np.allclose(once.y, twice.y, atol=1e-12)

    def test_standardize_sets_weighted_column_norms(self):
        rng = np.random.default_rng(15)
        data = TwoWayDataset(
            X=rng.standard_normal((6, 4)) * [1.0, 10.0, 0.1, 3.0],
            H=rand_spd(rng, 6), Q=rand_spd(rng, 4),
        )
        scaled, scales = standardize_columns(data)
        norms2 = np.einsum("ij,ik,kj->j", scaled.X, data.H, scaled.X)
        assert np.allclose(norms2, data.n, rtol=1e-10)
        assert np.allclose(scaled.X * scales, data.X, atol=1e-12)

    def test_standardize_rejects_zero_column(self):
        X = np.array([[1.0, 0.0], [2.0, 0.0], [3.0, 0.0]])
        data = TwoWayDataset(X=X, H=np.eye(3), Q=np.eye(2))
        with pytest.raises(DegenerateInputError, match="column 1"):
            standardize_columns(data)


@settings(max_examples=50, deadline=None)
@given(
    seed=st.integers(0, 10_000),
    n=st.integers(2, 8),
    p=st.integers(2, 8),
)
def test_gmd_identities_property(seed, n, p):
    rng = np.random.default_rng(seed)
    X = rng.standard_normal((n, p))
    H, Q = rand_spd(rng, n), rand_spd(rng, p)
    f = gmd(TwoWayDataset(X=X, H=H, Q=Q))
    assert max(gmd_residuals(f, X, H, Q)) < 1e-8
    # squared values are exactly the nonzero spectrum of X^T H X Q
    ref = np.sort(np.real(sla.eigvals(X.T @ H @ X @ Q)))[::-1][: f.K]
    assert np.allclose(f.s**2, ref, rtol=1e-8, atol=1e-10)
