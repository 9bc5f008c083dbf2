"""Multiplier bootstrap of the min-max statistic.

Conditional on the data, each replicate perturbs the centered, studentized
moments with independent standard normal multipliers,

    v*_j(theta) = n^{-1/2} sum_i xi_i (m_j(W_i, theta) - mbar_j) / sigma_j,

and reduces them to one of three statistics: selection (DR) keeps only the
near-binding indices at the estimated minimizers, penalization (PR)
re-profiles the perturbed moments with a damped recentering term, and the
combined statistic (MR) takes the per-replicate minimum of the two.

Ensembles evaluate the profiled infimum on a shared candidate set of
parameter points (warm points plus a low-discrepancy fill of the null
set).  Restricting the infimum to a finite candidate set can only raise a
replicate's value, so critical values err on the conservative side; the
exact per-replicate re-optimization is available both as the single-draw
operations below and through ``pr_mode="reoptimize"``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Iterable, Sequence

import numpy as np

from .errors import KappaTooSmall
from .model import MomentModel, Sample, studentize
from .optimize import NullRestriction, OptimCfg, profile_min
from .statistic import MinMaxResult, selected_indices
from .streams import TAG_ENSEMBLE, derive_seed, substream

DEFAULT_DRAWS = 1000
DEFAULT_CANDIDATES = 192
_CHUNK_FLOATS = 2 ** 24  # cap on per-chunk V tensor entries


def multiplier_matrix(
    n: int, b_draws: int, seed: int, stream_tag: int = TAG_ENSEMBLE
) -> np.ndarray:
    """Standard normal multipliers, replicate b in row b.

    The whole block comes from the single stream (seed, stream_tag),
    consumed in row-major order, so any row-wise chunking of the same
    stream reproduces it bit for bit.
    """
    return substream(seed, stream_tag).standard_normal((b_draws, n))


@dataclass
class MultiplierDraw:
    """One multiplier vector plus the induced bootstrap process.

    ``process(theta)`` returns the p-vector v*(theta); degenerate moment
    columns (zero variance) contribute exactly zero.  Values are cached
    per theta.
    """

    xi: np.ndarray
    model: MomentModel
    sample: Sample

    def __post_init__(self):
        self.xi = np.asarray(self.xi, dtype=float)
        if self.xi.shape != (self.sample.n,):
            raise ValueError("multiplier vector length must equal sample size")
        self._cache: dict[bytes, np.ndarray] = {}

    def process(self, theta: np.ndarray) -> np.ndarray:
        theta = np.asarray(theta, dtype=float)
        key = theta.tobytes()
        hit = self._cache.get(key)
        if hit is not None:
            return hit
        mat = self.model.moment_matrix(self.sample.rows, theta)
        mbar = mat.mean(axis=0)
        sigma = np.sqrt(np.mean((mat - mbar) ** 2, axis=0))
        dev = np.where(sigma > 0, (mat - mbar) / np.where(sigma > 0, sigma, 1.0), 0.0)
        value = self.xi @ dev / math.sqrt(self.sample.n)
        self._cache[key] = value
        return value


def draw_multiplier(
    sample: Sample, model: MomentModel, rng: np.random.Generator
) -> MultiplierDraw:
    """Draw one multiplier replicate from the given stream."""
    return MultiplierDraw(xi=rng.standard_normal(sample.n), model=model, sample=sample)


def center_terms(
    stud: np.ndarray, kappa: float, centering: str = "plain", wbar: float = 0.0
) -> np.ndarray:
    """Recentering added to the bootstrap process before the max.

    Plain centering damps the studentized moment by 1/kappa; the inf
    sentinel drops the term entirely.  Refined centering takes the
    pointwise minimum with the undamped moment shifted up by wbar, which
    is never larger and preserves validity.
    """
    if kappa == np.inf:
        plain = np.zeros_like(stud)
    else:
        plain = stud / kappa
    if centering == "plain":
        return plain
    if centering == "refined":
        return np.minimum(plain, stud + wbar)
    raise ValueError(f"unknown centering {centering!r}")


def _check_kappa(kappa: float) -> float:
    kappa = float(kappa)
    if not kappa >= 1.0:
        raise KappaTooSmall(kappa)
    return kappa


# --- single-draw statistics ------------------------------------------------


def dr_statistic(draw: MultiplierDraw, fit: MinMaxResult) -> float:
    """Selection bootstrap: min over retained minimizers of the max of
    v* over that minimizer's near-binding index set."""
    best = np.inf
    for theta_key, indices in fit.psi_hat.items():
        v = draw.process(np.asarray(theta_key))
        value = float(np.max(v[indices]))
        if value < best:
            best = value
    return best


def pr_statistic(
    draw: MultiplierDraw,
    model: MomentModel,
    sample: Sample,
    restriction: NullRestriction,
    kappa: float,
    centering: str = "plain",
    wbar: float = 0.0,
    cfg: OptimCfg | None = None,
) -> float:
    """Penalized bootstrap for one draw, re-profiled over the null set.

    The default budget caps the inner search at 200 evaluations; pass a
    cfg with warm starts (``extra_starts``) to begin at the data fit.
    """
    kappa = _check_kappa(kappa)
    cfg = cfg or OptimCfg(max_iters=200)

    def objective(theta: np.ndarray) -> np.ndarray:
        from .model import standardize

        stud = standardize(model, sample, theta).stud
        return draw.process(theta) + center_terms(stud, kappa, centering, wbar)

    return profile_min(objective, restriction, cfg).value


def mr_statistic(
    draw: MultiplierDraw,
    model: MomentModel,
    sample: Sample,
    restriction: NullRestriction,
    fit: MinMaxResult,
    kappa: float,
    centering: str = "plain",
    wbar: float = 0.0,
    cfg: OptimCfg | None = None,
) -> float:
    """Min of the selection and penalization statistics on one draw."""
    return min(
        dr_statistic(draw, fit),
        pr_statistic(draw, model, sample, restriction, kappa, centering, wbar, cfg),
    )


# --- ensembles ---------------------------------------------------------------


@dataclass(frozen=True)
class BootstrapEnsemble:
    """Replicate values of one bootstrap statistic, reproducible from
    (seed, method, b_draws)."""

    method: str
    values: np.ndarray
    seed: int
    b_draws: int
    params: dict = field(default_factory=dict)

    def __post_init__(self):
        values = np.asarray(self.values, dtype=float)
        values.setflags(write=False)
        object.__setattr__(self, "values", values)


@dataclass(frozen=True)
class CriticalValue:
    alpha: float
    c: float
    rank: int


def critical_value(ensemble: BootstrapEnsemble, alpha: float) -> CriticalValue:
    """Order-statistic (1 - alpha) quantile of the replicate values.

    Uses the ceil((1 - alpha) B)-th smallest value, the right-continuous
    (conservative) convention.
    """
    if not 0.0 < alpha < 1.0:
        raise ValueError(f"alpha must be in (0, 1), got {alpha}")
    values = ensemble.values
    b = values.size
    if b < 1:
        raise ValueError("ensemble has no replicates")
    rank = math.ceil((1.0 - alpha) * b - 1e-9)
    rank = min(max(rank, 1), b)
    c = float(np.partition(values, rank - 1)[rank - 1])
    return CriticalValue(alpha=alpha, c=c, rank=rank)


def candidate_thetas(
    restriction: NullRestriction,
    count: int,
    seed: int,
    include: Iterable[np.ndarray] = (),
) -> np.ndarray:
    """Candidate points for the profiled infimum: the supplied warm points
    first, then a low-discrepancy fill of the null set (deduplicated)."""
    points: list[np.ndarray] = []
    seen: set[bytes] = set()

    def push(theta: np.ndarray) -> None:
        theta = np.asarray(theta, dtype=float)
        key = theta.tobytes()
        if key not in seen:
            seen.add(key)
            points.append(theta)

    for theta in include:
        proj = restriction.project(np.asarray(theta, dtype=float))
        if proj is not None:
            push(proj)

    if restriction.discrete is not None:
        for theta in restriction.discrete:
            push(theta)
    elif restriction.free_dims == 0:
        push(restriction.pinned_point() if restriction.fixed else restriction._origin)
    else:
        for z in restriction.sample_starts(count, derive_seed(seed, 9)):
            push(restriction.embed(z))
    return np.asarray(points)


@dataclass(frozen=True)
class _Workspace:
    """Studentized quantities at the candidate points.

    ``studs`` is (C, p); ``devs`` stacks the per-candidate studentized
    deviation matrices side by side as (n, C * p) so that one matrix
    product evaluates the bootstrap process for every replicate and
    candidate at once.
    """

    thetas: np.ndarray
    studs: np.ndarray
    devs: np.ndarray


def _workspace(model: MomentModel, sample: Sample, thetas: np.ndarray) -> _Workspace:
    n = sample.n
    c_count = thetas.shape[0]
    p = model.p
    studs = np.empty((c_count, p))
    devs = np.empty((n, c_count * p))
    for c, theta in enumerate(thetas):
        mat = model.moment_matrix(sample.rows, theta)
        mbar = mat.mean(axis=0)
        sigma = np.sqrt(np.mean((mat - mbar) ** 2, axis=0))
        studs[c] = studentize(mbar, sigma, n)
        devs[:, c * p : (c + 1) * p] = np.where(
            sigma > 0, (mat - mbar) / np.where(sigma > 0, sigma, 1.0), 0.0
        )
    return _Workspace(thetas=thetas, studs=studs, devs=devs)


def _pr_reduce(v: np.ndarray, center: np.ndarray) -> np.ndarray:
    """(B, C, p) process values + (C, p) centering -> per-replicate min-max."""
    return (v + center[None, :, :]).max(axis=2).min(axis=1)


def _select_reduce(v: np.ndarray, selections: list[np.ndarray]) -> np.ndarray:
    """Per-candidate index-restricted max, then min over candidates."""
    best = np.full(v.shape[0], np.inf)
    for c, idx in enumerate(selections):
        if idx.size == 0:
            continue
        np.minimum(best, v[:, c, idx].max(axis=1), out=best)
    return best


def build_ensembles(
    model: MomentModel,
    sample: Sample,
    restriction: NullRestriction,
    fit: MinMaxResult | None,
    methods: Sequence[str],
    b_draws: int = DEFAULT_DRAWS,
    seed: int = 0,
    *,
    kappa: float | None = None,
    centering: str = "plain",
    wbar: float = 0.0,
    candidates: int = DEFAULT_CANDIDATES,
    stream_tag: int = TAG_ENSEMBLE,
    pr_mode: str = "candidates",
    pr_cfg: OptimCfg | None = None,
) -> dict[str, BootstrapEnsemble]:
    """Build the requested bootstrap ensembles on shared multiplier draws.

    All methods computed in one call see the same multiplier vectors, so
    the combined statistic really is the per-replicate minimum of the
    other two.  Multipliers come from the single stream
    ``(seed, stream_tag)`` in row-major order, so the replicate values do
    not depend on chunk size or thread count.
    """
    wanted = [m.lower() for m in methods]
    unknown = set(wanted) - {"dr", "pr", "mr", "naive"}
    if unknown:
        raise ValueError(f"unknown bootstrap methods: {sorted(unknown)}")
    need_dr = "dr" in wanted or "mr" in wanted
    need_pr = "pr" in wanted or "mr" in wanted
    if need_dr and fit is None:
        raise ValueError("selection bootstrap needs the min-max fit")
    if need_pr:
        if kappa is None:
            raise ValueError("penalized bootstrap needs a kappa value")
        kappa = _check_kappa(kappa)

    include: list[np.ndarray] = []
    if fit is not None:
        include.append(fit.fit.minimizer)
        include.extend(fit.fit.argmin_set)
        include.extend(np.asarray(k) for k in fit.psi_hat.keys())
    thetas = candidate_thetas(restriction, candidates, seed, include=include)
    ws = _workspace(model, sample, thetas)
    n = sample.n
    p = model.p
    c_count = thetas.shape[0]

    index_of = {theta.tobytes(): i for i, theta in enumerate(thetas)}

    dr_candidates: list[tuple[int, np.ndarray]] = []
    if need_dr:
        for theta_key, idx in fit.psi_hat.items():
            theta = np.asarray(theta_key, dtype=float)
            pos = index_of.get(theta.tobytes())
            if pos is None:
                raise RuntimeError("fit minimizer missing from candidate set")
            dr_candidates.append((pos, np.asarray(idx, dtype=int)))

    center = None
    if need_pr:
        center = center_terms(ws.studs, kappa, centering, wbar)

    naive_selections: list[np.ndarray] = []
    if "naive" in wanted:
        naive_selections = [selected_indices(ws.studs[c], 0.0) for c in range(c_count)]

    out_vals: dict[str, list[np.ndarray]] = {m: [] for m in ("dr", "pr", "naive")}
    chunk = max(1, min(b_draws, _CHUNK_FLOATS // max(1, c_count * p)))
    rng = substream(seed, stream_tag)
    start = 0
    while start < b_draws:
        stop = min(start + chunk, b_draws)
        xi = rng.standard_normal((stop - start, n))
        v = (xi @ ws.devs / math.sqrt(n)).reshape(stop - start, c_count, p)
        if need_dr:
            best = np.full(stop - start, np.inf)
            for pos, idx in dr_candidates:
                np.minimum(best, v[:, pos, idx].max(axis=1), out=best)
            out_vals["dr"].append(best)
        if need_pr and pr_mode == "candidates":
            out_vals["pr"].append(_pr_reduce(v, center))
        if "naive" in wanted:
            out_vals["naive"].append(_select_reduce(v, naive_selections))
        start = stop

    results: dict[str, BootstrapEnsemble] = {}
    base_params = {
        "candidates": c_count,
        "wbar": wbar,
        "stream_tag": stream_tag,
    }

    if need_pr and pr_mode == "reoptimize":
        warm = OptimCfg(max_iters=200) if pr_cfg is None else pr_cfg
        if fit is not None and not warm.extra_starts:
            from dataclasses import replace

            warm = replace(warm, extra_starts=tuple(fit.fit.argmin_set))
        xi_all = multiplier_matrix(n, b_draws, seed, stream_tag)
        vals = np.empty(b_draws)
        for b in range(b_draws):
            draw = MultiplierDraw(xi=xi_all[b], model=model, sample=sample)
            vals[b] = pr_statistic(
                draw, model, sample, restriction, kappa, centering, wbar, warm
            )
        out_vals["pr"] = [vals]

    def collect(name: str) -> np.ndarray:
        return np.concatenate(out_vals[name]) if out_vals[name] else np.empty(0)

    if "dr" in wanted:
        results["dr"] = BootstrapEnsemble(
            method="dr", values=collect("dr"), seed=seed, b_draws=b_draws,
            params=dict(base_params),
        )
    if "pr" in wanted:
        results["pr"] = BootstrapEnsemble(
            method="pr", values=collect("pr"), seed=seed, b_draws=b_draws,
            params=dict(base_params, kappa=kappa, centering=centering, mode=pr_mode),
        )
    if "mr" in wanted:
        results["mr"] = BootstrapEnsemble(
            method="mr",
            values=np.minimum(collect("dr"), collect("pr")),
            seed=seed,
            b_draws=b_draws,
            params=dict(base_params, kappa=kappa, centering=centering),
        )
    if "naive" in wanted:
        results["naive"] = BootstrapEnsemble(
            method="naive", values=collect("naive"), seed=seed, b_draws=b_draws,
            params=dict(base_params),
        )
    return results
