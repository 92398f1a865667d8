import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from regdgm.errors import InvalidInput
from regdgm.metrics import frechet_gaussian, median_heuristic, metric_report, mmd2


def brute_mmd2(X, Y, h):
    # direct double loops as an independent oracle
    k = lambda a, b: math.exp(-sum((ai - bi) ** 2 for ai, bi in zip(a, b)) / (2 * h * h))
    n, m = len(X), len(Y)
    xx = sum(k(X[i], X[j]) for i in range(n) for j in range(n) if i != j) / (n * (n - 1))
    yy = sum(k(Y[i], Y[j]) for i in range(m) for j in range(m) if i != j) / (m * (m - 1))
    xy = sum(k(a, b) for a in X for b in Y) / (n * m)
    bxx = sum(k(a, b) for a in X for b in X) / n**2
    byy = sum(k(a, b) for a in Y for b in Y) / m**2
    return xx + yy - 2 * xy, bxx + byy - 2 * xy


def with_moments(mean, cov, n=400, seed=0):
    # exact sample mean and covariance via whitening
    z = np.random.default_rng(seed).normal(size=(n, len(mean)))
    z -= z.mean(axis=0)
    L = np.linalg.cholesky(np.cov(z, rowvar=False))
    z = z @ np.linalg.inv(L).T
    return z @ np.linalg.cholesky(cov).T + mean


class TestMMD:
    def test_matches_brute_force(self):
        rng = np.random.default_rng(0)
        X, Y = rng.normal(size=(12, 2)), rng.normal(1.0, size=(9, 2))
        u, b = mmd2(X, Y, bandwidth=0.8)
        bu, bb = brute_mmd2(X.tolist(), Y.tolist(), 0.8)
        assert u == pytest.approx(bu, rel=1e-12)
        assert b == pytest.approx(bb, rel=1e-12)

    def test_identical_zero(self):
        X = np.random.default_rng(1).normal(size=(30, 2))
        assert mmd2(X, X.copy())[1] == pytest.approx(0.0, abs=1e-14)

    def test_far_apart_asymptote(self):
        X = np.zeros((5, 2))
        Y = np.full((5, 2), 1e6)
        assert mmd2(X, Y, bandwidth=1.0)[1] == pytest.approx(2.0)

    def test_permutation_null(self):
        rng = np.random.default_rng(2)
        X, Y = rng.normal(size=(500, 2)), rng.normal(size=(500, 2))
        h = median_heuristic(X, Y)
        stat = mmd2(X, Y, h)[0]
        Z = np.concatenate([X, Y])
        null = []
        for _ in range(100):
            p = rng.permutation(1000)
            null.append(mmd2(Z[p[:500]], Z[p[500:]], h)[0])
        assert abs(stat) <= 3 * np.std(null)

    def test_detects_shift(self):
        rng = np.random.default_rng(3)
        X, Y = rng.normal(size=(300, 2)), rng.normal(0.5, size=(300, 2))
        assert mmd2(X, Y)[0] > 0.02

    @settings(max_examples=40, deadline=None)
    @given(st.integers(0, 10_000), st.integers(2, 40), st.integers(2, 40))
    def test_symmetric_and_bounds(self, seed, n, m):
        rng = np.random.default_rng(seed)
        X, Y = rng.normal(size=(n, 2)), rng.normal(size=(m, 2))
        u1, b1 = mmd2(X, Y)
        u2, b2 = mmd2(Y, X)
        assert u1 == pytest.approx(u2, rel=1e-9, abs=1e-12)
        assert b1 == pytest.approx(b2, rel=1e-9, abs=1e-12)
        assert b1 >= 0
        assert u1 > -2.0 / min(n, m)

    def test_too_few(self):
        with pytest.raises(InvalidInput):
            mmd2([[0.0, 0.0]], [[1.0, 1.0], [2.0, 2.0]])


class TestFrechet:
    def test_identical(self):
        X = np.random.default_rng(4).normal(size=(50, 2))
        assert frechet_gaussian(X, X) == pytest.approx(0.0, abs=1e-12)

    def test_mean_shift(self):
        X = with_moments([0, 0], np.eye(2))
        Y = with_moments([1, 0], np.eye(2), seed=1)
        assert frechet_gaussian(X, Y) == pytest.approx(1.0, rel=1e-10)

    def test_scaled_cov(self):
        X = with_moments([0, 0], np.eye(2))
        Y = with_moments([0, 0], 4 * np.eye(2), seed=1)
        assert frechet_gaussian(X, Y) == pytest.approx(2.0, rel=1e-10)

    def test_noncommuting_against_eig_oracle(self):
        A = np.array([[2.0, 0.7], [0.7, 0.5]])
        B = np.array([[0.3, -0.2], [-0.2, 1.5]])
        X, Y = with_moments([0, 1], A), with_moments([1, 0], B, seed=2)
        # oracle: Tr sqrt(A^{1/2} B A^{1/2}) via eigendecomposition
        w, V = np.linalg.eigh(A)
        rA = V @ np.diag(np.sqrt(w)) @ V.T
        tr = np.sum(np.sqrt(np.linalg.eigvalsh(rA @ B @ rA)))
        expected = 2.0 + np.trace(A) + np.trace(B) - 2 * tr
        assert frechet_gaussian(X, Y) == pytest.approx(expected, rel=1e-10)

    @settings(max_examples=40, deadline=None)
    @given(st.integers(0, 10_000), st.floats(0, 2 * math.pi))
    def test_rotation_invariant_and_symmetric(self, seed, theta):
        rng = np.random.default_rng(seed)
        X = rng.normal(size=(40, 2)) @ rng.normal(size=(2, 2))
        Y = rng.normal(1.0, size=(30, 2))
        R = np.array([[math.cos(theta), -math.sin(theta)], [math.sin(theta), math.cos(theta)]])
        d = frechet_gaussian(X, Y)
        assert frechet_gaussian(X @ R.T, Y @ R.T) == pytest.approx(d, abs=1e-9)
        assert frechet_gaussian(Y, X) == pytest.approx(d, abs=1e-9)

    def test_singular_covariance(self):
        X = np.stack([np.linspace(0, 1, 20), np.zeros(20)], axis=1)
        assert np.isfinite(frechet_gaussian(X, X + 0.1))

    def test_too_few(self):
        with pytest.raises(InvalidInput):
            frechet_gaussian(np.zeros((2, 2)), np.zeros((5, 2)))


def test_report():
    rng = np.random.default_rng(5)
    r = metric_report(rng.normal(size=(40, 2)), rng.normal(size=(30, 2)))
    assert r.n_real == 40 and r.n_fake == 30 and r.bandwidth > 0 and r.frechet >= 0
