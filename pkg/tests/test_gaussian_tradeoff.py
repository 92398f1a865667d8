import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from regdgm.errors import DegenerateInterval, DegenerateOptimum, InvalidInput
from regdgm.gaussian_tradeoff import (
    EstimatorKind,
    GaussianSpec,
    admissible_beta_interval,
    estimate,
    expected_risk,
    monte_carlo_mse,
    mse_closed_form,
    optimal_beta,
    sweep,
)

DEFAULT = GaussianSpec()

specs = st.builds(
    GaussianSpec.from_bias,
    delta=st.floats(-3, 3).filter(lambda d: abs(d) > 1e-3),
    sigma2=st.floats(0.05, 20),
    m=st.integers(1, 5000),
)


class TestEstimate:
    def test_reg_equal_weight(self):
        spec = GaussianSpec(mu_star=0.0, mu_pre=1.0)
        assert estimate(EstimatorKind.reg(1.0), [-1.0, 1.0], spec) == pytest.approx(0.5)

    def test_reg_two_thirds(self):
        spec = GaussianSpec(mu_star=0.0, mu_pre=0.1)
        assert estimate(EstimatorKind.reg(2 / 3), [0.1, 0.3], spec) == pytest.approx(0.16, abs=1e-15)

    @given(st.lists(st.floats(-1e6, 1e6), min_size=1, max_size=50))
    def test_reg_zero_bit_identical_to_mle(self, xs):
        a = estimate(EstimatorKind.reg(0.0), xs, DEFAULT)
        b = estimate(EstimatorKind.mle(), xs, DEFAULT)
        assert np.float64(a).tobytes() == np.float64(b).tobytes()

    def test_pre_ignores_sample(self):
        assert estimate(EstimatorKind.pre(), [], DEFAULT) == DEFAULT.mu_pre

    @pytest.mark.parametrize("kind", [EstimatorKind.mle(), EstimatorKind.reg(0.3)])
    def test_empty_sample_rejected(self, kind):
        with pytest.raises(InvalidInput):
            estimate(kind, [], DEFAULT)

    def test_negative_lambda_rejected(self):
        with pytest.raises(InvalidInput):
            EstimatorKind.reg(-0.1)


class TestClosedForm:
    @pytest.mark.parametrize(
        "beta, expected",
        [(0.0, 1 / 150), (1.0, 0.01), (0.4, 0.004)],
    )
    def test_default_points(self, beta, expected):
        assert mse_closed_form(DEFAULT, beta).mse_reg == pytest.approx(expected, rel=1e-12)

    def test_beta_out_of_range(self):
        with pytest.raises(InvalidInput):
            mse_closed_form(DEFAULT, 1.2)

    def test_interval_default(self):
        lo, hi = admissible_beta_interval(DEFAULT)
        assert lo == 0.0
        assert hi == pytest.approx(0.8, rel=1e-14)

    def test_interval_small_m_large_bias(self):
        lo, hi = admissible_beta_interval(GaussianSpec.from_bias(10.0, m=1))
        assert lo == 0.0
        assert hi == pytest.approx(2 / 101, rel=1e-14)

    def test_interval_zero_bias(self):
        with pytest.raises(DegenerateInterval) as exc:
            admissible_beta_interval(GaussianSpec.from_bias(0.0))
        assert exc.value.lo == 1.0 and exc.value.hi == 1.0

    @pytest.mark.parametrize(
        "m, beta, lam, mse",
        [(150, 0.4, 2 / 3, 0.004), (10, 1 / 1.1, 10.0, 0.01 / 1.1)],
    )
    def test_optimal_beta(self, m, beta, lam, mse):
        b, l, v = optimal_beta(GaussianSpec.from_bias(0.1, m=m))
        assert b == pytest.approx(beta, rel=1e-12)
        assert l == pytest.approx(lam, rel=1e-12)
        assert v == pytest.approx(mse, rel=1e-12)

    def test_optimal_beta_zero_bias(self):
        with pytest.raises(DegenerateOptimum) as exc:
            optimal_beta(GaussianSpec.from_bias(0.0))
        assert exc.value.beta_limit == 1.0 and math.isinf(exc.value.lambda_limit)


class TestProperties:
    @settings(max_examples=200)
    @given(specs)
    def test_interior_beats_both_baselines(self, spec):
        lo, hi = admissible_beta_interval(spec)
        assert lo < hi
        for beta in np.linspace(lo, hi, 203)[1:-1]:
            p = mse_closed_form(spec, float(beta))
            assert p.mse_reg < min(p.mse_mle, p.mse_pre)

    @settings(max_examples=200)
    @given(specs)
    def test_boundary_equalities(self, spec):
        lo, hi = admissible_beta_interval(spec)
        if hi < 1:
            p = mse_closed_form(spec, hi)
            assert p.mse_reg == pytest.approx(p.mse_mle, rel=1e-9)
        if lo > 0:
            p = mse_closed_form(spec, lo)
            assert p.mse_reg == pytest.approx(p.mse_pre, rel=1e-9)

    @settings(max_examples=100)
    @given(specs)
    def test_optimum_matches_grid_search(self, spec):
        # independent oracle: brute-force argmin on a fine grid
        grid = np.linspace(0, 1, 200001)
        d2, v = spec.delta() ** 2, spec.sigma2 / spec.m
        vals = grid**2 * d2 + (1 - grid) ** 2 * v
        b, _, mse_min = optimal_beta(spec)
        assert abs(grid[np.argmin(vals)] - b) <= 1e-5
        assert mse_min <= vals.min() * (1 + 1e-12)
        harmonic = spec.mse_mle * spec.mse_pre / (spec.mse_mle + spec.mse_pre)
        assert mse_min == pytest.approx(harmonic, rel=1e-12)

    @settings(max_examples=100)
    @given(specs, st.floats(0, 1), st.floats(0, 1))
    def test_strict_convexity(self, spec, b1, b2):
        mid = 0.5 * (b1 + b2)
        f = lambda b: mse_closed_form(spec, b).mse_reg
        if abs(b1 - b2) > 1e-3:
            assert f(mid) < 0.5 * (f(b1) + f(b2))


class TestExpectedRisk:
    def test_zero_mse(self):
        assert expected_risk(DEFAULT, 0.0) == pytest.approx(1.4189385332046727, rel=1e-14)

    def test_mle_mse(self):
        assert expected_risk(DEFAULT, 1 / 150) == pytest.approx(1.4189385332046727 + 1 / 300, rel=1e-14)

    def test_matches_numerical_nll(self):
        # oracle: integrate -log N(x | mu_hat, s2) against N(mu*, s2) by quadrature
        spec = GaussianSpec(mu_star=0.3, sigma2=2.0, m=10, mu_pre=0.0)
        mu_hat = 0.9
        nodes, weights = np.polynomial.hermite_e.hermegauss(60)
        x = spec.mu_star + math.sqrt(spec.sigma2) * nodes
        nll = 0.5 * np.log(2 * np.pi * spec.sigma2) + (x - mu_hat) ** 2 / (2 * spec.sigma2)
        risk = np.sum(weights * nll) / math.sqrt(2 * math.pi)
        assert expected_risk(spec, (mu_hat - spec.mu_star) ** 2) == pytest.approx(risk, rel=1e-12)

    @given(specs, st.floats(0, 10), st.floats(0, 10))
    def test_ordering_preserved(self, spec, a, b):
        if a < b:
            assert expected_risk(spec, a) <= expected_risk(spec, b)

    def test_negative_rejected(self):
        with pytest.raises(InvalidInput):
            expected_risk(DEFAULT, -1e-3)


class TestMonteCarlo:
    def test_pre_exact(self):
        mse, se = monte_carlo_mse(DEFAULT, EstimatorKind.pre(), 10, seed=1)
        assert mse == DEFAULT.delta() ** 2 and se == 0.0

    @pytest.mark.parametrize(
        "kind, oracle",
        [(EstimatorKind.mle(), 1 / 150), (EstimatorKind.reg(2 / 3), 0.004), (EstimatorKind.reg(3.0), None)],
    )
    def test_agrees_with_closed_form(self, kind, oracle):
        if oracle is None:
            oracle = mse_closed_form(DEFAULT, kind.beta).mse_reg
        mse, se = monte_carlo_mse(DEFAULT, kind, 20000, seed=11)
        assert abs(mse - oracle) <= 3 * se

    def test_deterministic(self):
        a = monte_carlo_mse(DEFAULT, EstimatorKind.mle(), 50, seed=3)
        b = monte_carlo_mse(DEFAULT, EstimatorKind.mle(), 50, seed=3)
        assert a == b

    def test_too_few_trials(self):
        with pytest.raises(InvalidInput):
            monte_carlo_mse(DEFAULT, EstimatorKind.mle(), 1)


class TestSweep:
    def test_beta_axis(self):
        rows = sweep(DEFAULT, "beta", [0.0, 0.4, 0.8])
        got = [r.mse_reg_cf for r in rows]
        assert got == pytest.approx([1 / 150, 0.004, 1 / 150], rel=1e-12)
        assert all(r.mse_reg_mc is None for r in rows)

    def test_sample_size_axis(self):
        rows = sweep(DEFAULT, "sample_size", [10, 150, 1000])
        ratios = [r.mse_reg_cf / r.mse_mle_cf for r in rows]
        assert ratios == pytest.approx([1 / 11, 0.6, 10 / 11], rel=1e-12)

    def test_bias_axis(self):
        grid = [0.05, 0.1, 0.2]
        rows = sweep(DEFAULT, "bias", grid)
        expected = [d * d / (1 + 150 * d * d) for d in grid]
        assert [r.mse_reg_cf for r in rows] == pytest.approx(expected, rel=1e-12)
        # gap to PRE grows with the bias, gap to MLE shrinks
        assert rows[0].gap_vs_pre < rows[1].gap_vs_pre < rows[2].gap_vs_pre
        assert rows[0].gap_vs_mle > rows[1].gap_vs_mle > rows[2].gap_vs_mle

    def test_zero_bias_limit_row(self):
        (row,) = sweep(DEFAULT, "bias", [0.0])
        assert row.degenerate and row.beta == 1.0 and row.mse_reg_cf == 0.0

    def test_mc_columns(self):
        rows = sweep(DEFAULT, "beta", [0.4], mc_trials=2000, seed=5)
        assert rows[0].mse_reg_mc is not None and rows[0].stderr > 0

    @pytest.mark.parametrize(
        "axis, grid",
        [("beta", [1.5]), ("sample_size", [2.5]), ("sample_size", [0]), ("bias", [float("nan")]), ("beta", []), ("nope", [0.1])],
    )
    def test_invalid(self, axis, grid):
        with pytest.raises(InvalidInput):
            sweep(DEFAULT, axis, grid)
