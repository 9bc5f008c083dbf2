"""Sample containers, studentization conventions, and CSV loading."""

import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from momineq import (
    ConditionalMoments,
    MomentModel,
    Sample,
    convert_equalities,
    instrument_expand,
    load_csv,
    standardize,
    studentize,
)
from momineq.errors import (
    EmptyModel,
    MissingColumn,
    NegativeInstrumentValue,
    NonNumericCell,
    ThetaOutOfBox,
    TooFewRows,
)


class TestSample:
    def test_basic(self):
        s = Sample(rows=np.array([[1.0, 2.0], [3.0, 4.0]]))
        assert s.n == 2
        assert s.column_names == ("c0", "c1")

    def test_named_columns(self):
        s = Sample(rows=np.zeros((3, 2)), column_names=("a", "b"))
        assert s.column_names == ("a", "b")

    def test_rows_are_read_only(self):
        s = Sample(rows=np.zeros((2, 1)))
        with pytest.raises(ValueError):
            s.rows[0, 0] = 1.0

    def test_too_few_rows(self):
        with pytest.raises(TooFewRows):
            Sample(rows=np.zeros((1, 3)))

    def test_rejects_one_dimensional(self):
        with pytest.raises(ValueError):
            Sample(rows=np.zeros(5))

    def test_rejects_nan(self):
        with pytest.raises(ValueError):
            Sample(rows=np.array([[0.0], [np.nan]]))

    def test_name_length_mismatch(self):
        with pytest.raises(ValueError):
            Sample(rows=np.zeros((2, 2)), column_names=("only",))


class TestStudentize:
    def test_two_point_sample(self):
        # m values {0, 2}: mean 1, divisor-n sd 1, so stud = sqrt(2) * 1 / 1.
        mbar = np.array([1.0])
        sigma = np.array([1.0])
        out = studentize(mbar, sigma, 2)
        assert out[0] == pytest.approx(math.sqrt(2.0), abs=1e-15)

    def test_degenerate_signs(self):
        mbar = np.array([0.5, -0.5, 0.0])
        sigma = np.zeros(3)
        out = studentize(mbar, sigma, 10)
        assert out[0] == np.inf
        assert out[1] == -np.inf
        assert out[2] == 0.0

    def test_mixed_degenerate_and_regular(self):
        mbar = np.array([1.0, 2.0])
        sigma = np.array([0.0, 4.0])
        out = studentize(mbar, sigma, 100)
        assert out[0] == np.inf
        assert out[1] == pytest.approx(10.0 * 2.0 / 4.0)


class TestStandardize:
    def test_matches_hand_computation(self):
        model = MomentModel(
            d_theta=1,
            p_ineq=1,
            p_eq=0,
            theta_box=np.array([[-5.0, 5.0]]),
            matrix_fn=lambda rows, theta: rows[:, :1],
        )
        sample = Sample(rows=np.array([[0.0], [2.0]]))
        out = standardize(model, sample, np.array([0.0]))
        assert out.mbar[0] == pytest.approx(1.0)
        assert out.sigma_hat[0] == pytest.approx(1.0)
        assert out.stud[0] == pytest.approx(math.sqrt(2.0))

    def test_divisor_is_n_not_n_minus_1(self):
        model = MomentModel(
            d_theta=1,
            p_ineq=1,
            p_eq=0,
            theta_box=np.array([[-5.0, 5.0]]),
            matrix_fn=lambda rows, theta: rows[:, :1],
        )
        sample = Sample(rows=np.array([[0.0], [1.0], [2.0]]))
        out = standardize(model, sample, np.array([0.0]))
        assert out.sigma_hat[0] == pytest.approx(math.sqrt(2.0 / 3.0))

    def test_theta_out_of_box(self):
        model = MomentModel(
            d_theta=1,
            p_ineq=1,
            p_eq=0,
            theta_box=np.array([[0.0, 1.0]]),
            matrix_fn=lambda rows, theta: rows[:, :1],
        )
        sample = Sample(rows=np.zeros((3, 1)))
        with pytest.raises(ThetaOutOfBox):
            standardize(model, sample, np.array([2.0]))


class TestEqualities:
    def _model(self):
        # One inequality (theta - w), one equality (w - theta).
        def raw(rows, theta):
            return np.column_stack(
                [theta[0] - rows[:, 0], rows[:, 0] - theta[0]]
            )

        return convert_equalities(
            1, 1, raw, d_theta=1, theta_box=np.array([[-5.0, 5.0]])
        )

    def test_p_counts_doubled_equalities(self):
        model = self._model()
        assert model.p_ineq == 1
        assert model.p_eq == 1
        assert model.p == 3

    def test_stack_order_and_sign(self):
        model = self._model()
        rows = np.array([[0.5], [1.5], [2.5]])
        mat = model.moment_matrix(rows, np.array([1.0]))
        assert mat.shape == (3, 3)
        # columns: [ineq, +eq, -eq]
        np.testing.assert_allclose(mat[:, 1], -mat[:, 2])
        np.testing.assert_allclose(mat[:, 0], 1.0 - rows[:, 0])

    def test_equality_stud_is_antisymmetric(self):
        model = self._model()
        sample = Sample(rows=np.array([[0.1], [0.9], [2.0], [3.0]]))
        stud = standardize(model, sample, np.array([1.0])).stud
        # negating a column negates its mean and keeps its sd, exactly
        assert stud[1] == -stud[2]

    def test_empty_model_rejected(self):
        with pytest.raises(EmptyModel):
            convert_equalities(
                0, 0, lambda r, t: r, d_theta=1, theta_box=np.array([[0.0, 1.0]])
            )

    @given(st.lists(st.floats(-50, 50), min_size=3, max_size=12))
    @settings(max_examples=30, deadline=None)
    def test_antisymmetry_property(self, values):
        model = self._model()
        sample = Sample(rows=np.asarray(values)[:, None])
        stud = standardize(model, sample, np.array([0.0])).stud
        # holds exactly even in the degenerate (constant-column) case,
        # where the signs come from the mean
        assert stud[1] == -stud[2] or (stud[1] == 0.0 and stud[2] == 0.0)


class TestInstrumentExpansion:
    def _conditional(self):
        return ConditionalMoments(
            d_theta=1,
            theta_box=np.array([[-5.0, 5.0]]),
            ineq_fns=(lambda rows, theta: theta[0] - rows[:, 0],),
            eq_fns=(),
            cond_cols=(1,),
        )

    def test_column_count(self):
        model = instrument_expand(
            self._conditional(),
            [lambda x: np.ones(x.shape[0]), lambda x: x[:, 0] ** 2],
        )
        assert model.p == 2

    def test_moment_values(self):
        model = instrument_expand(
            self._conditional(),
            [lambda x: np.ones(x.shape[0]), lambda x: x[:, 0] ** 2],
        )
        rows = np.array([[1.0, 2.0], [3.0, 0.5]])
        mat = model.moment_matrix(rows, np.array([0.0]))
        np.testing.assert_allclose(mat[:, 0], [-1.0, -3.0])
        np.testing.assert_allclose(mat[:, 1], [-4.0, -0.75])

    def test_negative_instrument_raises(self):
        model = instrument_expand(self._conditional(), [lambda x: x[:, 0]])
        rows = np.array([[1.0, -2.0], [3.0, 0.5]])
        with pytest.raises(NegativeInstrumentValue):
            model.moment_matrix(rows, np.array([0.0]))

    def test_equality_only_tolerates_negative_instrument(self):
        cond = ConditionalMoments(
            d_theta=1,
            theta_box=np.array([[-5.0, 5.0]]),
            ineq_fns=(),
            eq_fns=(lambda rows, theta: theta[0] - rows[:, 0],),
            cond_cols=(1,),
        )
        model = instrument_expand(cond, [lambda x: x[:, 0]])
        rows = np.array([[1.0, -2.0], [3.0, 0.5]])
        mat = model.moment_matrix(rows, np.array([0.0]))
        assert mat.shape == (2, 2)

    def test_empty_instruments(self):
        with pytest.raises(EmptyModel):
            instrument_expand(self._conditional(), [])


class TestLoadCsv:
    def _write(self, tmp_path, text):
        path = tmp_path / "data.csv"
        path.write_text(text)
        return str(path)

    def test_happy_path(self, tmp_path):
        path = self._write(tmp_path, "a,b\n1,2\n3,4\n")
        s = load_csv(path)
        assert s.column_names == ("a", "b")
        np.testing.assert_allclose(s.rows, [[1.0, 2.0], [3.0, 4.0]])

    def test_schema_reorders_and_drops(self, tmp_path):
        path = self._write(tmp_path, "a,b,c\n1,2,3\n4,5,6\n")
        s = load_csv(path, schema=["c", "a"])
        assert s.column_names == ("c", "a")
        np.testing.assert_allclose(s.rows, [[3.0, 1.0], [6.0, 4.0]])

    def test_missing_column(self, tmp_path):
        path = self._write(tmp_path, "a,b\n1,2\n3,4\n")
        with pytest.raises(MissingColumn, match="zz"):
            load_csv(path, schema=["zz"])

    def test_non_numeric_cell_reports_position(self, tmp_path):
        path = self._write(tmp_path, "a,b\n1,2\n3,oops\n")
        with pytest.raises(NonNumericCell) as err:
            load_csv(path)
        msg = str(err.value)
        assert "2" in msg  # 1-based data row
        assert "b" in msg

    def test_infinity_rejected(self, tmp_path):
        path = self._write(tmp_path, "a\n1\ninf\n")
        with pytest.raises(NonNumericCell):
            load_csv(path)

    def test_blank_lines_skipped(self, tmp_path):
        path = self._write(tmp_path, "a\n1\n\n2\n,\n")
        # the ',' line has only empty cells and is also skipped
        s = load_csv(path)
        assert s.n == 2

    def test_too_few_rows(self, tmp_path):
        path = self._write(tmp_path, "a\n1\n")
        with pytest.raises(TooFewRows):
            load_csv(path)

    def test_empty_file(self, tmp_path):
        path = self._write(tmp_path, "")
        with pytest.raises(TooFewRows):
            load_csv(path)
