"""Data-driven tuning: process envelopes, anti-concentration, kappa.

Everything here conditions on the data and works with the same candidate
evaluation machinery as the bootstrap ensembles.  The envelope wbar is a
high quantile of the sup of the absolute bootstrap process; it scales the
selection margin and enters the penalization constant rule

    kappa_n = smallest grid kappa with kappa >= wbar * A(W, kappa) * n^c,

where A(W, kappa) is an anti-concentration estimate of the bootstrap
statistic around its own critical value.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .bootstrap import (
    BootstrapEnsemble,
    _pr_reduce,
    _workspace,
    candidate_thetas,
    center_terms,
    critical_value,
)
from .errors import GammaOutOfRange
from .model import MomentModel, Sample
from .optimize import NullRestriction, OptimCfg, profile_min
from .statistic import stud_objective
from .streams import TAG_SCAN, TAG_WBAR, substream

DEFAULT_WBAR_DRAWS = 300
DEFAULT_SCAN_DRAWS = 200
KAPPA_GRID_RATIO = 1.25
AC_GRID_RATIO = 1.2


def default_wbar_gamma(n: int) -> float:
    """Envelope quantile level 1/(10 log n)."""
    return 1.0 / (10.0 * math.log(n))


def _fit_argmin(model, sample, restriction, seed) -> tuple[np.ndarray, ...]:
    fit = profile_min(
        stud_objective(model, sample), restriction, OptimCfg(seed=seed)
    )
    return fit.argmin_set


def estimate_wbar(
    model: MomentModel,
    sample: Sample,
    restriction: NullRestriction,
    draws: int = DEFAULT_WBAR_DRAWS,
    gamma: float | None = None,
    seed: int = 0,
    *,
    candidates: int = 128,
    argmin_points: tuple | None = None,
) -> float:
    """(1 - gamma) quantile of sup |v*| over the candidate null points.

    The candidate set is a low-discrepancy fill of the null set plus the
    profiled minimizers (computed here when not supplied).  gamma defaults
    to 1/(10 log n).
    """
    n = sample.n
    if gamma is None:
        gamma = default_wbar_gamma(n)
    if not 0.0 < gamma < 1.0:
        raise GammaOutOfRange(gamma, hint=": needs (0, 1)")
    if draws < 1:
        raise ValueError("need at least one draw")
    if argmin_points is None:
        argmin_points = _fit_argmin(model, sample, restriction, seed)
    thetas = candidate_thetas(restriction, candidates, seed, include=argmin_points)
    ws = _workspace(model, sample, thetas)
    root_n = math.sqrt(n)
    rng = substream(seed, TAG_WBAR)
    sup = np.empty(draws)
    cols = max(1, ws.devs.shape[1])
    chunk = max(1, min(draws, 2**24 // cols))
    start = 0
    while start < draws:
        stop = min(start + chunk, draws)
        xi = rng.standard_normal((stop - start, n))
        block = np.abs(xi @ ws.devs)
        sup[start:stop] = block.max(axis=1, initial=0.0) / root_n
        start = stop
    rank = min(max(math.ceil((1.0 - gamma) * draws - 1e-9), 1), draws)
    return float(np.partition(sup, rank - 1)[rank - 1])


def anti_concentration(
    values: np.ndarray, c_hat: float, delta_floor: float
) -> float:
    """Max over a geometric epsilon grid of P(|value - c| <= eps) / eps.

    The grid is delta_floor * 1.2^k, truncated at the value range (the
    floor itself always stays in).  Larger output means more mass packed
    near the critical value.
    """
    values = np.asarray(values, dtype=float)
    if values.size == 0:
        raise ValueError("need at least one value")
    if not delta_floor > 0:
        raise ValueError("delta_floor must be positive")
    dist = np.abs(values - c_hat)
    finite = dist[np.isfinite(dist)]
    if finite.size == 0:
        return 0.0
    span = float(np.ptp(values[np.isfinite(values)])) if np.isfinite(values).any() else 0.0
    top = max(span, delta_floor)
    best = 0.0
    eps = delta_floor
    while eps <= top * (1.0 + 1e-12):
        frac = float(np.mean(dist <= eps))
        best = max(best, frac / eps)
        eps *= AC_GRID_RATIO
    return best


@dataclass(frozen=True)
class LbarEstimate:
    """Largest mass-below-m_n radius around the critical value."""

    l: float
    all_mass_at_c: bool


def anti_concentration_lbar(
    values: np.ndarray, c_hat: float, m_n: float
) -> LbarEstimate:
    """Largest l with empirical P(|value - c_hat| <= l) <= m_n.

    Uses the observed distances as the grid (the floor(m_n * B)-th
    smallest distance, stepping down over ties), so the estimate is the
    exact empirical boundary.  A point mass at c_hat leaves no qualifying
    radius: the estimate is 0 with the flag set.  m_n >= 1 never binds
    and returns 0 by convention.
    """
    values = np.asarray(values, dtype=float)
    b = values.size
    if b == 0:
        raise ValueError("need at least one value")
    if m_n <= 0:
        raise ValueError("m_n must be positive")
    if m_n >= 1.0:
        return LbarEstimate(l=0.0, all_mass_at_c=False)
    dist = np.sort(np.abs(values - c_hat))
    budget = m_n * b
    k = int(math.floor(budget + 1e-9))
    # Walk down through ties until the count at the candidate radius fits.
    while k >= 1:
        l = dist[k - 1]
        if np.searchsorted(dist, l, side="right") <= budget + 1e-9:
            return LbarEstimate(l=float(l), all_mass_at_c=False)
        k -= 1
    return LbarEstimate(l=0.0, all_mass_at_c=True)


@dataclass(frozen=True)
class KappaSelection:
    """Outcome of the kappa scan."""

    kappa_n: float
    ac_at_kappa: float
    satisfied: bool
    grid: np.ndarray
    c_grid: np.ndarray
    ac_grid: np.ndarray


def kappa_grid(n: int) -> np.ndarray:
    """Geometric grid 1, 1.25, 1.25^2, ... capped at n."""
    ks = [1.0]
    while ks[-1] * KAPPA_GRID_RATIO <= n:
        ks.append(ks[-1] * KAPPA_GRID_RATIO)
    return np.asarray(ks)


def select_kappa(
    model: MomentModel,
    sample: Sample,
    restriction: NullRestriction,
    wbar: float,
    draws: int = DEFAULT_SCAN_DRAWS,
    c_exp: float = 0.1,
    seed: int = 0,
    *,
    alpha: float = 0.05,
    centering: str = "plain",
    candidates: int = 192,
    argmin_points: tuple | None = None,
    delta_floor: float | None = None,
) -> KappaSelection:
    """Scan the kappa grid for the smallest value satisfying the rule.

    For each grid kappa a reduced penalized ensemble is built on shared
    scan draws, its (1 - alpha) critical value taken, and the
    anti-concentration of the ensemble around that critical value
    estimated.  When no grid point satisfies kappa >= wbar * A(W, kappa)
    * n^c_exp the fallback sqrt(n)/log(n) is returned with
    ``satisfied=False``.
    """
    n = sample.n
    if delta_floor is None:
        delta_floor = 1.0 / math.sqrt(n)
    if argmin_points is None:
        argmin_points = _fit_argmin(model, sample, restriction, seed)
    thetas = candidate_thetas(restriction, candidates, seed, include=argmin_points)
    ws = _workspace(model, sample, thetas)
    root_n = math.sqrt(n)
    c_count, p = ws.studs.shape
    xi = substream(seed, TAG_SCAN).standard_normal((draws, n))
    v = (xi @ ws.devs / root_n).reshape(draws, c_count, p)

    grid = kappa_grid(n)
    scale = n ** c_exp
    c_vals = np.empty(grid.size)
    ac_vals = np.empty(grid.size)
    chosen = None
    for i, kappa in enumerate(grid):
        center = center_terms(ws.studs, kappa, centering, wbar)
        values = _pr_reduce(v, center)
        ens = BootstrapEnsemble(
            method="pr", values=values, seed=seed, b_draws=draws,
            params={"kappa": kappa},
        )
        c_vals[i] = critical_value(ens, alpha).c
        ac_vals[i] = anti_concentration(values, c_vals[i], delta_floor)
        if chosen is None and kappa >= wbar * ac_vals[i] * scale:
            chosen = i

    if chosen is not None:
        return KappaSelection(
            kappa_n=float(grid[chosen]),
            ac_at_kappa=float(ac_vals[chosen]),
            satisfied=True,
            grid=grid,
            c_grid=c_vals,
            ac_grid=ac_vals,
        )
    fallback = math.sqrt(n) / math.log(n)
    center = center_terms(ws.studs, fallback, centering, wbar)
    values = _pr_reduce(v, center)
    ens = BootstrapEnsemble(
        method="pr", values=values, seed=seed, b_draws=draws,
        params={"kappa": fallback},
    )
    c_fb = critical_value(ens, alpha).c
    return KappaSelection(
        kappa_n=fallback,
        ac_at_kappa=anti_concentration(values, c_fb, delta_floor),
        satisfied=False,
        grid=grid,
        c_grid=c_vals,
        ac_grid=ac_vals,
    )


def rate_diagnostic(
    p: int, d_theta: int, n: int, kappa_n: float, wbar: float, ac: float
) -> float:
    """Warning score: the coupling-rate bound times the anti-concentration.

    Scores well below 1 are reassuring; large values flag that the
    penalized approximation may be coarse for this design.  The log term
    is evaluated as log p + d_theta log n to dodge overflow.
    """
    big_l = math.log(p) + d_theta * math.log(n)
    lhs = (
        (big_l ** 4 / n) ** (1.0 / 6.0)
        + kappa_n * math.sqrt(d_theta) * big_l / math.sqrt(n)
        + wbar / kappa_n
    )
    return lhs * ac


@dataclass(frozen=True)
class TuningReport:
    """Every tuned quantity a test run used, for reporting."""

    wbar: float
    gamma_used: float
    m_n: float
    kappa_n: float
    ac_at_kappa: float
    delta_floor: float
    diagnostic: float
    b_used: int
    seed: int
    kappa_satisfied: bool = True
