"""Moment-inequality models, sample containers, and studentization.

A model collects ``p`` moment functions ``m_j(W, theta)`` whose population
means are all restricted to be nonpositive on the identified set.  Moment
equalities enter as two opposing inequalities; conditional moments enter
through nonnegative instrument functions of the conditioning columns.

The studentized sample moment is

    stud_j(theta) = sqrt(n) * mbar_j(theta) / sigma_j(theta),

with ``mbar`` the column mean and ``sigma`` the divisor-``n`` standard
deviation.  A degenerate column (``sigma == 0``) studentizes to ``+inf``,
``-inf`` or ``0`` according to the sign of its mean.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np

from .errors import (
    EmptyModel,
    MissingColumn,
    NegativeInstrumentValue,
    NonNumericCell,
    ThetaOutOfBox,
    TooFewRows,
)

# Batched evaluator: (rows (n, k), theta (d,)) -> moment matrix (n, p).
MomentMatrixFn = Callable[[np.ndarray, np.ndarray], np.ndarray]

MIN_ROWS = 2


@dataclass(frozen=True)
class Sample:
    """Immutable n-by-k data matrix with named columns."""

    rows: np.ndarray
    column_names: tuple[str, ...] = ()

    def __post_init__(self):
        rows = np.asarray(self.rows, dtype=float)
        if rows.ndim != 2:
            raise ValueError("sample rows must be a 2-d array")
        if rows.shape[0] < MIN_ROWS:
            raise TooFewRows(rows.shape[0])
        if not np.isfinite(rows).all():
            raise ValueError("sample contains non-finite entries")
        names = tuple(self.column_names) or tuple(
            f"c{i}" for i in range(rows.shape[1])
        )
        if len(names) != rows.shape[1]:
            raise ValueError("column_names length does not match row width")
        rows.setflags(write=False)
        object.__setattr__(self, "rows", rows)
        object.__setattr__(self, "column_names", names)

    @property
    def n(self) -> int:
        return self.rows.shape[0]


@dataclass(frozen=True)
class MomentModel:
    """A set of p moment inequalities over a box-shaped parameter space.

    ``matrix_fn`` evaluates all moments at once and is the workhorse for
    everything downstream; ``evaluate`` exposes the scalar per-observation
    contract for callers that want a single ``m_j(w, theta)``.
    """

    d_theta: int
    p_ineq: int
    p_eq: int
    theta_box: np.ndarray
    matrix_fn: MomentMatrixFn
    name: str = ""

    def __post_init__(self):
        if self.d_theta < 1:
            raise ValueError("d_theta must be >= 1")
        if self.p_ineq < 0 or self.p_eq < 0:
            raise ValueError("moment counts cannot be negative")
        if self.p_ineq + self.p_eq == 0:
            raise EmptyModel("model has no moment functions")
        box = np.asarray(self.theta_box, dtype=float)
        if box.shape != (self.d_theta, 2):
            raise ValueError("theta_box must have shape (d_theta, 2)")
        if not (box[:, 0] <= box[:, 1]).all():
            raise ValueError("theta_box has an empty coordinate interval")
        box.setflags(write=False)
        object.__setattr__(self, "theta_box", box)

    @property
    def p(self) -> int:
        """Effective inequality count: equalities contribute two rows each."""
        return self.p_ineq + 2 * self.p_eq

    def contains(self, theta: np.ndarray, tol: float = 1e-9) -> bool:
        theta = np.asarray(theta, dtype=float)
        if theta.shape != (self.d_theta,):
            return False
        lo, hi = self.theta_box[:, 0], self.theta_box[:, 1]
        return bool((theta >= lo - tol).all() and (theta <= hi + tol).all())

    def moment_matrix(self, rows: np.ndarray, theta: np.ndarray) -> np.ndarray:
        theta = np.asarray(theta, dtype=float)
        out = np.asarray(self.matrix_fn(rows, theta), dtype=float)
        n = rows.shape[0]
        if out.shape != (n, self.p):
            raise ValueError(
                f"moment evaluator returned shape {out.shape}, "
                f"expected {(n, self.p)}"
            )
        return out

    def evaluate(self, w: np.ndarray, theta: np.ndarray, j: int) -> float:
        """Single moment function at a single observation."""
        w = np.atleast_2d(np.asarray(w, dtype=float))
        if not 0 <= j < self.p:
            raise IndexError(f"moment index {j} out of range [0, {self.p})")
        return float(self.matrix_fn(w, np.asarray(theta, dtype=float))[0, j])


def convert_equalities(
    p_ineq: int,
    p_eq: int,
    raw_fn: MomentMatrixFn,
    *,
    d_theta: int,
    theta_box: np.ndarray,
    name: str = "",
) -> MomentModel:
    """Wrap a raw evaluator so each equality becomes a +/- inequality pair.

    ``raw_fn`` returns an ``(n, p_ineq + p_eq)`` matrix whose first
    ``p_ineq`` columns are inequality moments and the rest equalities.
    The converted model stacks ``[ineq, +eq, -eq]`` in that order.
    """
    if p_ineq + p_eq == 0:
        raise EmptyModel("no moment functions to convert")

    def matrix(rows: np.ndarray, theta: np.ndarray) -> np.ndarray:
        raw = np.asarray(raw_fn(rows, theta), dtype=float)
        if raw.ndim != 2 or raw.shape[1] != p_ineq + p_eq:
            raise ValueError(
                f"raw evaluator returned shape {raw.shape}, expected "
                f"(n, {p_ineq + p_eq})"
            )
        if p_eq == 0:
            return raw
        eq = raw[:, p_ineq:]
        return np.concatenate([raw[:, :p_ineq], eq, -eq], axis=1)

    return MomentModel(
        d_theta=d_theta,
        p_ineq=p_ineq,
        p_eq=p_eq,
        theta_box=np.asarray(theta_box, dtype=float),
        matrix_fn=matrix,
        name=name,
    )


# Scalar-per-observation conditional moment: (rows, theta) -> (n,) values.
ConditionalFn = Callable[[np.ndarray, np.ndarray], np.ndarray]


@dataclass(frozen=True)
class ConditionalMoments:
    """Conditional moment restrictions before instrument expansion.

    ``cond_cols`` indexes the conditioning variables inside the data rows;
    instrument functions receive exactly those columns.
    """

    d_theta: int
    theta_box: np.ndarray
    ineq_fns: tuple[ConditionalFn, ...] = ()
    eq_fns: tuple[ConditionalFn, ...] = ()
    cond_cols: tuple[int, ...] = ()


def instrument_expand(
    conditional: ConditionalMoments,
    instruments: Sequence[Callable[[np.ndarray], np.ndarray]],
    *,
    name: str = "",
) -> MomentModel:
    """Turn conditional moments into unconditional ones via instruments.

    Every pair (moment tau, instrument g) yields the product moment
    ``m_tau(W, theta) * g(X)``.  Instruments must be nonnegative on the
    data whenever inequality moments are present; a negative value would
    silently flip an inequality, so it raises instead.

    The expanded inequality block enumerates moments in the outer loop and
    instruments in the inner loop; the equality block follows and is then
    converted to opposing inequality pairs.
    """
    instruments = tuple(instruments)
    if not instruments:
        raise EmptyModel("instrument list is empty")
    n_i = len(conditional.ineq_fns)
    n_e = len(conditional.eq_fns)
    if n_i + n_e == 0:
        raise EmptyModel("conditional model has no moment functions")
    g_count = len(instruments)

    def raw(rows: np.ndarray, theta: np.ndarray) -> np.ndarray:
        x = rows[:, list(conditional.cond_cols)]
        gvals = np.column_stack([np.asarray(g(x), dtype=float) for g in instruments])
        if n_i > 0 and (gvals < 0).any():
            raise NegativeInstrumentValue(
                "instrument took a negative value with inequality moments present"
            )
        blocks = []
        for fn in conditional.ineq_fns + conditional.eq_fns:
            vals = np.asarray(fn(rows, theta), dtype=float).reshape(-1, 1)
            blocks.append(vals * gvals)
        return np.concatenate(blocks, axis=1)

    return convert_equalities(
        n_i * g_count,
        n_e * g_count,
        raw,
        d_theta=conditional.d_theta,
        theta_box=conditional.theta_box,
        name=name,
    )


@dataclass(frozen=True)
class StandardizedMoments:
    """Column means, divisor-n deviations, and studentized moments at theta."""

    theta: np.ndarray
    mbar: np.ndarray
    sigma_hat: np.ndarray
    stud: np.ndarray


def studentize(mbar: np.ndarray, sigma: np.ndarray, n: int) -> np.ndarray:
    """sqrt(n) * mbar / sigma with the degenerate-column convention.

    Columns with zero standard deviation map to +inf, -inf, or 0 by the
    sign of the mean, so a constant violated moment stays maximally
    violated and a constant satisfied one drops out of every max.
    """
    root_n = math.sqrt(n)
    out = np.empty_like(mbar)
    positive = sigma > 0
    out[positive] = root_n * mbar[positive] / sigma[positive]
    deg = ~positive
    if deg.any():
        out[deg] = np.where(
            mbar[deg] > 0, np.inf, np.where(mbar[deg] < 0, -np.inf, 0.0)
        )
    return out


def standardize(
    model: MomentModel, sample: Sample, theta: np.ndarray
) -> StandardizedMoments:
    """Evaluate, center, and studentize all moments at ``theta``."""
    theta = np.asarray(theta, dtype=float)
    if not model.contains(theta):
        raise ThetaOutOfBox(theta, model.theta_box)
    mat = model.moment_matrix(sample.rows, theta)
    mbar = mat.mean(axis=0)
    sigma = np.sqrt(np.mean((mat - mbar) ** 2, axis=0))
    stud = studentize(mbar, sigma, sample.n)
    return StandardizedMoments(theta=theta, mbar=mbar, sigma_hat=sigma, stud=stud)


def load_csv(path: str, schema: Sequence[str] | None = None) -> Sample:
    """Read a numeric CSV with a header row into a Sample.

    ``schema`` lists the required columns, which are extracted in schema
    order; extra file columns are ignored.  With no schema every column is
    kept in file order.  Cells must parse to finite floats: empty cells,
    text, NaN, and infinities are all rejected with the offending
    position (1-based data row, column name).
    """
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise TooFewRows(0) from None
        header = [h.strip() for h in header]
        if schema is None:
            wanted = list(header)
        else:
            wanted = list(schema)
            for col in wanted:
                if col not in header:
                    raise MissingColumn(col)
        idx = [header.index(col) for col in wanted]

        data: list[list[float]] = []
        for row_no, row in enumerate(reader, start=1):
            if not row or all(not cell.strip() for cell in row):
                continue
            parsed = []
            for col_name, col_idx in zip(wanted, idx):
                cell = row[col_idx].strip() if col_idx < len(row) else ""
                try:
                    value = float(cell)
                except ValueError:
                    raise NonNumericCell(row_no, col_name, cell) from None
                if not math.isfinite(value):
                    raise NonNumericCell(row_no, col_name, cell)
                parsed.append(value)
            data.append(parsed)

    if len(data) < MIN_ROWS:
        raise TooFewRows(len(data))
    return Sample(rows=np.asarray(data, dtype=float), column_names=tuple(wanted))
