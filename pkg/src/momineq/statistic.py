"""The profiled min-max test statistic and its index selection sets.

The statistic is the profiled worst studentized moment,

    T_n(eta) = inf over Theta(eta) of max_j stud_j(theta),

and the accompanying selection keeps, for each retained minimizer, the
indices whose studentized moments come within a margin M_n of the max.
Those sets feed the selection bootstrap.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .model import MomentModel, Sample, standardize
from .optimize import NullRestriction, OptimCfg, ProfiledFit, profile_min


def stud_objective(model: MomentModel, sample: Sample):
    """theta -> vector of studentized sample moments."""

    def objective(theta: np.ndarray) -> np.ndarray:
        return standardize(model, sample, theta).stud

    return objective


def selected_indices(stud: np.ndarray, margin: float) -> np.ndarray:
    """Indices with stud_j >= max_j' stud_j' - margin (extended reals).

    An infinite margin keeps everything.  When the max itself is +inf only
    the infinite coordinates can reach it for finite margins; a -inf max
    means every coordinate is -inf and all are kept.
    """
    top = np.max(stud)
    if math.isinf(margin) and margin > 0:
        return np.arange(stud.shape[0])
    if top == np.inf:
        return np.flatnonzero(stud == np.inf)
    if top == -np.inf:
        return np.arange(stud.shape[0])
    return np.flatnonzero(stud >= top - margin)


@dataclass(frozen=True)
class StatisticConfig:
    """Settings for minmax_statistic.

    ``margin`` is the selection slack M_n; None resolves it to
    wbar * log(n) with wbar estimated from ``wbar_draws`` multiplier
    replicates at level ``wbar_gamma`` (default 1 / (10 log n)).
    """

    optim: OptimCfg = field(default_factory=OptimCfg)
    margin: float | None = None
    wbar_draws: int = 300
    wbar_gamma: float | None = None
    seed: int = 0


@dataclass(frozen=True)
class MinMaxResult:
    """The statistic, the underlying fit, and per-minimizer index sets."""

    t_n: float
    fit: ProfiledFit
    psi_hat: dict[tuple[float, ...], np.ndarray]
    m_n_used: float


def psi_sets(
    model: MomentModel,
    sample: Sample,
    thetas,
    margin: float,
) -> dict[tuple[float, ...], np.ndarray]:
    """Map each theta to its near-binding index set at the given margin."""
    out: dict[tuple[float, ...], np.ndarray] = {}
    for theta in thetas:
        theta = np.asarray(theta, dtype=float)
        stud = standardize(model, sample, theta).stud
        out[tuple(theta)] = selected_indices(stud, margin)
    return out


def minmax_statistic(
    model: MomentModel,
    sample: Sample,
    restriction: NullRestriction,
    cfg: StatisticConfig | None = None,
) -> MinMaxResult:
    """Compute T_n(eta) and the selection sets at the retained minimizers.

    The retained set follows the optimizer's argmin policy: the default
    keeps the single best minimizer, "all" keeps every evaluated point
    within the argmin slack (deduplicated).
    """
    cfg = cfg or StatisticConfig()
    fit = profile_min(stud_objective(model, sample), restriction, cfg.optim)
    margin = cfg.margin
    if margin is None:
        from .tuning import estimate_wbar

        wbar = estimate_wbar(
            model,
            sample,
            restriction,
            draws=cfg.wbar_draws,
            gamma=cfg.wbar_gamma,
            seed=cfg.seed,
            argmin_points=fit.argmin_set,
        )
        margin = wbar * math.log(sample.n)
    psi = psi_sets(model, sample, fit.argmin_set, margin)
    return MinMaxResult(t_n=fit.value, fit=fit, psi_hat=psi, m_n_used=margin)
