"""Min-max statistic and near-binding index selection."""

import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from momineq import (
    MomentModel,
    NullRestriction,
    OptimCfg,
    Sample,
    StatisticConfig,
    minmax_statistic,
    selected_indices,
)


class TestSelectedIndices:
    def test_zero_margin_keeps_argmax_only(self):
        stud = np.array([1.0, 3.0, 3.0, 2.0])
        np.testing.assert_array_equal(selected_indices(stud, 0.0), [1, 2])

    def test_finite_margin(self):
        stud = np.array([1.0, 3.0, 2.5])
        np.testing.assert_array_equal(selected_indices(stud, 0.6), [1, 2])

    def test_infinite_margin_keeps_all(self):
        stud = np.array([-np.inf, 0.0, np.inf])
        np.testing.assert_array_equal(selected_indices(stud, np.inf), [0, 1, 2])

    def test_infinite_top_keeps_only_infinite(self):
        stud = np.array([1.0, np.inf, 2.0])
        np.testing.assert_array_equal(selected_indices(stud, 5.0), [1])

    def test_all_minus_infinity_keeps_all(self):
        stud = np.array([-np.inf, -np.inf])
        np.testing.assert_array_equal(selected_indices(stud, 1.0), [0, 1])

    @given(
        st.lists(st.floats(-100, 100), min_size=1, max_size=20),
        st.floats(0, 10),
        st.floats(0, 10),
    )
    @settings(max_examples=50, deadline=None)
    def test_monotone_in_margin(self, values, m1, extra):
        stud = np.asarray(values)
        small = set(selected_indices(stud, m1).tolist())
        large = set(selected_indices(stud, m1 + extra).tolist())
        assert small <= large


def _two_moment_model():
    # m_1 = (t1 + t2) - w1, m_2 = w2 - (t1 + t2); identified set is a segment
    def matrix(rows, theta):
        s = theta[0] + theta[1]
        return np.column_stack([s - rows[:, 0], rows[:, 1] - s])

    return MomentModel(
        d_theta=2,
        p_ineq=2,
        p_eq=0,
        theta_box=np.array([[-1.0, 1.0], [-1.0, 1.0]]),
        matrix_fn=matrix,
    )


def _closed_form_t(sample):
    # profiling over s = t1 + t2 gives T = sqrt(n) (wbar2 - wbar1) / (s1 + s2)
    # whenever the crossing point lies inside the feasible range of s
    w = sample.rows
    wb = w.mean(axis=0)
    sd = np.sqrt(((w - wb) ** 2).mean(axis=0))
    return math.sqrt(w.shape[0]) * (wb[1] - wb[0]) / (sd[0] + sd[1])


class TestMinMaxStatistic:
    def test_matches_closed_form_on_the_segment_model(self):
        rng = np.random.default_rng(11)
        model = _two_moment_model()
        for trial in range(5):
            sample = Sample(rows=rng.standard_normal((200, 2)))
            r = NullRestriction.subvector(model.theta_box, {0: 0.0})
            res = minmax_statistic(model, sample, r, StatisticConfig(margin=0.0))
            assert res.t_n == pytest.approx(_closed_form_t(sample), abs=1e-5)

    def test_explicit_margin_is_recorded(self):
        model = _two_moment_model()
        sample = Sample(rows=np.random.default_rng(0).standard_normal((50, 2)))
        r = NullRestriction.subvector(model.theta_box, {0: 0.0})
        res = minmax_statistic(model, sample, r, StatisticConfig(margin=0.25))
        assert res.m_n_used == 0.25

    def test_default_margin_is_estimated(self):
        model = _two_moment_model()
        sample = Sample(rows=np.random.default_rng(1).standard_normal((80, 2)))
        r = NullRestriction.subvector(model.theta_box, {0: 0.0})
        res = minmax_statistic(model, sample, r, StatisticConfig())
        assert res.m_n_used > 0.0
        assert math.isfinite(res.m_n_used)

    def test_psi_keys_are_the_argmin_points(self):
        model = _two_moment_model()
        sample = Sample(rows=np.random.default_rng(2).standard_normal((60, 2)))
        r = NullRestriction.subvector(model.theta_box, {0: 0.0})
        res = minmax_statistic(model, sample, r, StatisticConfig(margin=1.0))
        keys = set(res.psi_hat)
        assert keys == {tuple(t) for t in res.fit.argmin_set}
        for idx in res.psi_hat.values():
            assert idx.size >= 1

    def test_large_margin_selects_both_moments(self):
        model = _two_moment_model()
        sample = Sample(rows=np.random.default_rng(3).standard_normal((60, 2)))
        r = NullRestriction.subvector(model.theta_box, {0: 0.0})
        res = minmax_statistic(model, sample, r, StatisticConfig(margin=np.inf))
        for idx in res.psi_hat.values():
            np.testing.assert_array_equal(idx, [0, 1])

    def test_degenerate_satisfied_moment_gives_minus_inf(self):
        # constant column with negative mean studentizes to -inf
        model = MomentModel(
            d_theta=1,
            p_ineq=1,
            p_eq=0,
            theta_box=np.array([[-1.0, 1.0]]),
            matrix_fn=lambda rows, theta: np.full((rows.shape[0], 1), -2.0),
        )
        sample = Sample(rows=np.zeros((10, 1)))
        r = NullRestriction.subvector(model.theta_box, {0: 0.0})
        res = minmax_statistic(model, sample, r, StatisticConfig(margin=0.0))
        assert res.t_n == -np.inf
