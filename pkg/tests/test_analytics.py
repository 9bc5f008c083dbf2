"""Closed-form min-max Gaussian distribution and its bounds."""

import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy import stats

from momineq import (
    MinMaxGaussianSpec,
    density_bounds,
    iid_normal_sampler,
    mc_minmax_density,
    minmax_cdf,
    minmax_density,
)


class TestCdf:
    def test_exact_rational_points(self):
        # P(min over N rows of max over p cols <= 0) with Phi(0) = 1/2
        assert minmax_cdf(MinMaxGaussianSpec(2, 1), 0.0) == pytest.approx(
            0.75, abs=1e-15
        )
        assert minmax_cdf(MinMaxGaussianSpec(1, 2), 0.0) == pytest.approx(
            0.25, abs=1e-15
        )
        assert minmax_cdf(MinMaxGaussianSpec(2, 3), 0.0) == pytest.approx(
            0.234375, abs=1e-15
        )

    def test_one_by_one_is_standard_normal(self):
        spec = MinMaxGaussianSpec(1, 1)
        for t in (-2.0, -0.5, 0.0, 1.3):
            assert minmax_cdf(spec, t) == pytest.approx(
                float(stats.norm.cdf(t)), abs=1e-14
            )

    def test_limits(self):
        spec = MinMaxGaussianSpec(3, 4)
        assert minmax_cdf(spec, -np.inf) == 0.0
        assert minmax_cdf(spec, np.inf) == 1.0
        assert minmax_cdf(spec, -40.0) == pytest.approx(0.0, abs=1e-300)
        assert minmax_cdf(spec, 40.0) == 1.0

    def test_vectorized(self):
        spec = MinMaxGaussianSpec(2, 3)
        ts = np.array([-1.0, 0.0, 1.0])
        out = minmax_cdf(spec, ts)
        assert out.shape == (3,)
        assert out[1] == pytest.approx(0.234375)

    def test_extreme_tail_no_underflow_to_garbage(self):
        # survival exponentiation must stay in log space
        spec = MinMaxGaussianSpec(10, 100)
        val = minmax_cdf(spec, -10.0)
        assert 0.0 <= val < 1e-20

    @given(
        st.integers(1, 20),
        st.integers(1, 50),
        st.floats(-8, 8),
        st.floats(0, 4),
    )
    @settings(max_examples=60, deadline=None)
    def test_monotone_in_t(self, n_rows, p_cols, t, step):
        spec = MinMaxGaussianSpec(n_rows, p_cols)
        assert minmax_cdf(spec, t) <= minmax_cdf(spec, t + step) + 1e-12


class TestDensity:
    def test_frozen_value_at_zero(self):
        # N p (1 - Phi^p)^(N-1) Phi^(p-1) phi at t = 0 for (2, 3)
        assert minmax_density(MinMaxGaussianSpec(2, 3), 0.0) == pytest.approx(
            0.5236117430268804, rel=1e-12
        )

    def test_one_by_one_is_normal_pdf(self):
        spec = MinMaxGaussianSpec(1, 1)
        for t in (-1.5, 0.0, 2.0):
            assert minmax_density(spec, t) == pytest.approx(
                float(stats.norm.pdf(t)), rel=1e-12
            )

    def test_nonnegative_everywhere(self):
        spec = MinMaxGaussianSpec(5, 7)
        ts = np.linspace(-10, 10, 401)
        assert (minmax_density(spec, ts) >= 0).all()

    def test_infinite_arguments_give_zero(self):
        spec = MinMaxGaussianSpec(2, 2)
        assert minmax_density(spec, np.inf) == 0.0
        assert minmax_density(spec, -np.inf) == 0.0

    def test_nan_propagates(self):
        spec = MinMaxGaussianSpec(2, 2)
        assert math.isnan(minmax_density(spec, np.nan))

    def test_finite_difference_of_cdf(self):
        h = 1e-5
        for spec in (MinMaxGaussianSpec(2, 3), MinMaxGaussianSpec(4, 6)):
            for t in np.linspace(-4, 4, 33):
                fd = (minmax_cdf(spec, t + h) - minmax_cdf(spec, t - h)) / (2 * h)
                assert fd == pytest.approx(
                    minmax_density(spec, t), abs=1e-7, rel=1e-5
                )

    def test_integrates_to_one(self):
        from scipy.integrate import simpson

        spec = MinMaxGaussianSpec(2, 3)
        ts = np.linspace(-10, 10, 4001)
        total = simpson(minmax_density(spec, ts), x=ts)
        assert total == pytest.approx(1.0, abs=1e-8)


class TestBounds:
    def test_frozen_upper_and_lower(self):
        b = density_bounds(MinMaxGaussianSpec(10, 100))
        assert b.upper == pytest.approx(123.97270975143255, rel=1e-12)
        assert b.lower == pytest.approx(0.32899347553479674, rel=1e-12)
        assert b.hypothesis_ok

    def test_hypothesis_flag_cases(self):
        # (10,10): p/sqrt(2 pi) = 3.99 < log(100) = 4.61
        assert not density_bounds(MinMaxGaussianSpec(10, 10)).hypothesis_ok
        # (2,3): log(6) < 2
        assert not density_bounds(MinMaxGaussianSpec(2, 3)).hypothesis_ok

    def test_single_row_lower_is_zero(self):
        assert density_bounds(MinMaxGaussianSpec(1, 50)).lower == 0.0

    def test_peak_respects_bounds_where_hypothesis_holds(self):
        spec = MinMaxGaussianSpec(10, 100)
        b = density_bounds(spec)
        ts = np.linspace(-2, 6, 4001)
        peak = float(minmax_density(spec, ts).max())
        assert b.lower <= peak <= b.upper


class TestMcDensity:
    def test_shapes_and_bandwidth(self):
        spec = MinMaxGaussianSpec(2, 3)
        out = mc_minmax_density(iid_normal_sampler(spec), draws=5000, seed=1)
        assert out.grid.shape == out.density.shape
        assert out.draws.shape == (5000,)
        assert out.bandwidth > 0

    def test_matches_closed_form_roughly(self):
        spec = MinMaxGaussianSpec(2, 3)
        grid = np.linspace(-3, 3, 61)
        out = mc_minmax_density(
            iid_normal_sampler(spec), draws=40000, grid=grid, seed=2
        )
        exact = minmax_density(spec, grid)
        assert np.max(np.abs(out.density - exact)) < 0.05

    def test_empirical_cdf_matches(self):
        spec = MinMaxGaussianSpec(2, 3)
        out = mc_minmax_density(iid_normal_sampler(spec), draws=50000, seed=3)
        for t in (-1.0, 0.0, 1.0):
            emp = float((out.draws <= t).mean())
            assert emp == pytest.approx(minmax_cdf(spec, t), abs=0.01)

    def test_chunking_is_invisible(self):
        spec = MinMaxGaussianSpec(2, 2)
        a = mc_minmax_density(iid_normal_sampler(spec), draws=3000, seed=4, chunk=512)
        b = mc_minmax_density(iid_normal_sampler(spec), draws=3000, seed=4, chunk=3000)
        np.testing.assert_array_equal(a.draws, b.draws)

    def test_needs_two_draws(self):
        spec = MinMaxGaussianSpec(1, 1)
        with pytest.raises(ValueError):
            mc_minmax_density(iid_normal_sampler(spec), draws=1)


def test_spec_validation():
    with pytest.raises(ValueError):
        MinMaxGaussianSpec(0, 3)
    with pytest.raises(ValueError):
        MinMaxGaussianSpec(3, 0)
