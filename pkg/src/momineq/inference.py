"""Hypothesis tests, confidence sets, and the simulation harness.

``run_test`` wires the pieces together for one null value: profile the
statistic, estimate the tuning quantities the chosen method needs, build
its critical value, and compare.  ``confidence_set`` inverts the test
over a grid of null values.  ``simulate_rejection_rate`` repeats the test
over freshly simulated samples with per-replicate derived seeds.

The NAIVE method bootstraps the profiled min-max with per-point argmax
selection but no penalization and no restriction of the minimum to the
estimated minimizers.  It is included as a cautionary baseline only: it
over-rejects by construction and every report it produces carries a
warning saying so.
"""

from __future__ import annotations

import math
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, replace
from typing import Callable

import numpy as np

from .bootstrap import build_ensembles, critical_value
from .errors import EmptyGrid, InfeasibleRestriction
from .model import MomentModel, Sample
from .optimize import NullRestriction, OptimCfg, profile_min
from .sn import SnSearchCfg, sn_critical_value, sn_two_step
from .statistic import MinMaxResult, psi_sets, stud_objective
from .streams import TAG_DATA, TAG_TEST, derive_seed, substream
from .tuning import (
    TuningReport,
    anti_concentration,
    default_wbar_gamma,
    estimate_wbar,
    rate_diagnostic,
    select_kappa,
)

METHODS = ("sn", "sn2s", "dr", "pr", "mr", "naive")

NAIVE_WARNING = (
    "NAIVE bootstrap is not a valid test: selecting binding indices at "
    "every null point without penalization understates the critical value "
    "and over-rejects. Included for illustration only."
)


@dataclass(frozen=True)
class InferenceConfig:
    """Knobs shared by run_test, confidence_set, and the simulator."""

    b_draws: int = 1000
    seed: int = 0
    kappa: float | None = None
    gamma: float | None = None
    margin: float | None = None
    centering: str = "plain"
    wbar_draws: int = 300
    wbar_gamma: float | None = None
    scan_draws: int = 200
    c_exp: float = 0.1
    candidates: int = 192
    sn_grid_points: int | None = None
    pr_mode: str = "candidates"
    force_critical: float | None = None
    optim: OptimCfg = field(default_factory=OptimCfg)
    threads: int = 1


@dataclass(frozen=True)
class TestReport:
    """Outcome of one test of h(theta) = eta."""

    eta: np.ndarray
    t_n: float
    method: str
    alpha: float
    critical_value: float
    reject: bool
    theta_hat: np.ndarray
    tuning: TuningReport | None
    b_draws: int
    seed: int
    elapsed_s: float
    warnings: tuple[str, ...] = ()


def run_test(
    model: MomentModel,
    sample: Sample,
    restriction: NullRestriction,
    method: str,
    alpha: float,
    cfg: InferenceConfig | None = None,
) -> TestReport:
    """Test h(theta) = eta; rejects when the statistic strictly exceeds
    the method's critical value."""
    method_l = method.lower()
    if method_l not in METHODS:
        raise ValueError(f"unknown method {method!r}; choose from {METHODS}")
    if not 0.0 < alpha < 1.0:
        raise ValueError(f"alpha must be in (0, 1), got {alpha}")
    cfg = cfg or InferenceConfig()
    t0 = time.perf_counter()
    n = sample.n
    warnings: list[str] = []

    fit = profile_min(stud_objective(model, sample), restriction, cfg.optim)
    t_n = fit.value
    tuning: TuningReport | None = None

    if method_l == "sn":
        c = sn_critical_value(model.p, alpha, n)
    elif method_l == "sn2s":
        state = sn_two_step(
            model,
            sample,
            restriction,
            alpha,
            cfg.gamma,
            SnSearchCfg(
                grid_points=cfg.sn_grid_points, seed=cfg.seed, optim=cfg.optim
            ),
        )
        if state.used_fallback:
            warnings.append(
                "two-step search found no feasible point; using the full-p "
                "critical value at level alpha - 3 gamma"
            )
        c = state.c_final
    elif method_l == "naive":
        warnings.append(NAIVE_WARNING)
        mm = MinMaxResult(
            t_n=t_n,
            fit=fit,
            psi_hat=psi_sets(model, sample, fit.argmin_set, 0.0),
            m_n_used=0.0,
        )
        ens = build_ensembles(
            model,
            sample,
            restriction,
            mm,
            ["naive"],
            b_draws=cfg.b_draws,
            seed=cfg.seed,
            candidates=cfg.candidates,
        )
        c = critical_value(ens["naive"], alpha).c
    else:
        wbar_gamma = (
            cfg.wbar_gamma if cfg.wbar_gamma is not None else default_wbar_gamma(n)
        )
        wbar = estimate_wbar(
            model,
            sample,
            restriction,
            draws=cfg.wbar_draws,
            gamma=wbar_gamma,
            seed=cfg.seed,
            candidates=cfg.candidates,
            argmin_points=fit.argmin_set,
        )
        margin = cfg.margin if cfg.margin is not None else wbar * math.log(n)
        mm = MinMaxResult(
            t_n=t_n,
            fit=fit,
            psi_hat=psi_sets(model, sample, fit.argmin_set, margin),
            m_n_used=margin,
        )
        kappa_n = math.nan
        ac = math.nan
        satisfied = True
        delta_floor = 1.0 / math.sqrt(n)
        if method_l in ("pr", "mr"):
            if cfg.kappa is not None:
                kappa_n = float(cfg.kappa)
            else:
                sel = select_kappa(
                    model,
                    sample,
                    restriction,
                    wbar,
                    draws=cfg.scan_draws,
                    c_exp=cfg.c_exp,
                    seed=cfg.seed,
                    alpha=alpha,
                    centering=cfg.centering,
                    candidates=cfg.candidates,
                    argmin_points=fit.argmin_set,
                    delta_floor=delta_floor,
                )
                kappa_n = sel.kappa_n
                ac = sel.ac_at_kappa
                satisfied = sel.satisfied
                if not satisfied:
                    warnings.append(
                        "no grid kappa satisfied the selection rule; using "
                        "sqrt(n)/log(n)"
                    )
        needed = {"dr": ["dr"], "pr": ["pr"], "mr": ["dr", "pr", "mr"]}[method_l]
        ens = build_ensembles(
            model,
            sample,
            restriction,
            mm,
            needed,
            b_draws=cfg.b_draws,
            seed=cfg.seed,
            kappa=kappa_n if method_l in ("pr", "mr") else None,
            centering=cfg.centering,
            wbar=wbar,
            candidates=cfg.candidates,
            pr_mode=cfg.pr_mode,
        )
        c = critical_value(ens[method_l], alpha).c
        if math.isnan(ac):
            ac = anti_concentration(ens[method_l].values, c, delta_floor)
        diagnostic = (
            rate_diagnostic(model.p, model.d_theta, n, kappa_n, wbar, ac)
            if math.isfinite(kappa_n)
            else math.nan
        )
        tuning = TuningReport(
            wbar=wbar,
            gamma_used=wbar_gamma,
            m_n=margin,
            kappa_n=kappa_n,
            ac_at_kappa=ac,
            delta_floor=delta_floor,
            diagnostic=diagnostic,
            b_used=cfg.b_draws,
            seed=cfg.seed,
            kappa_satisfied=satisfied,
        )

    if cfg.force_critical is not None:
        c = float(cfg.force_critical)
    return TestReport(
        eta=restriction.eta,
        t_n=t_n,
        method=method_l,
        alpha=alpha,
        critical_value=float(c),
        reject=bool(t_n > c),
        theta_hat=fit.minimizer,
        tuning=tuning,
        b_draws=cfg.b_draws,
        seed=cfg.seed,
        elapsed_s=time.perf_counter() - t0,
        warnings=tuple(warnings),
    )


@dataclass(frozen=True)
class ConfidenceSet:
    """Grid inversion of the test, with refined boundary brackets."""

    eta_grid: np.ndarray
    statistics: np.ndarray
    critical_values: np.ndarray
    accepted: np.ndarray
    infeasible: np.ndarray
    lower: float
    upper: float
    lower_bracket: tuple[float, float]
    upper_bracket: tuple[float, float]
    contiguous: bool
    empty: bool


def _map_ordered(fn, items, threads: int):
    if threads <= 1 or len(items) <= 1:
        return [fn(item) for item in items]
    with ThreadPoolExecutor(max_workers=threads) as pool:
        return list(pool.map(fn, items))


def confidence_set(
    model: MomentModel,
    sample: Sample,
    h_coord: int,
    alpha: float,
    method: str,
    eta_grid: np.ndarray,
    cfg: InferenceConfig | None = None,
    bisection_iters: int = 8,
) -> ConfidenceSet:
    """Collect the grid points whose null is not rejected.

    Every null evaluation reuses the same seed and config, so a point is
    in the set exactly when run_test accepts it.  When the accepted
    points form one contiguous run, each boundary is refined by
    ``bisection_iters`` rounds of bisection between the outermost
    accepted point and its rejected neighbor.
    """
    grid = np.asarray(eta_grid, dtype=float)
    if grid.size == 0:
        raise EmptyGrid("confidence-set grid is empty")
    if grid.ndim != 1 or (grid.size > 1 and not (np.diff(grid) > 0).all()):
        raise ValueError("eta grid must be strictly increasing")
    cfg = cfg or InferenceConfig()

    def evaluate(eta: float) -> tuple[float, float, bool, bool]:
        try:
            restriction = NullRestriction.subvector(
                model.theta_box, {h_coord: float(eta)}
            )
        except InfeasibleRestriction:
            return math.inf, -math.inf, False, True
        report = run_test(model, sample, restriction, method, alpha, cfg)
        return report.t_n, report.critical_value, report.reject, False

    rows = _map_ordered(evaluate, list(grid), cfg.threads)
    stats = np.array([r[0] for r in rows])
    crits = np.array([r[1] for r in rows])
    accepted = np.array([not r[2] and not r[3] for r in rows])
    infeasible = np.array([r[3] for r in rows])

    idx = np.flatnonzero(accepted)
    empty = idx.size == 0
    contiguous = (not empty) and bool(
        np.all(np.diff(idx) == 1)
    )

    def bisect(out_eta: float, in_eta: float) -> tuple[float, float]:
        for _ in range(bisection_iters):
            mid = 0.5 * (out_eta + in_eta)
            _, _, rej, infeas = evaluate(mid)
            if rej or infeas:
                out_eta = mid
            else:
                in_eta = mid
        return out_eta, in_eta

    lower = upper = math.nan
    lower_bracket = upper_bracket = (math.nan, math.nan)
    if contiguous:
        first, last = idx[0], idx[-1]
        if first > 0:
            out_eta, in_eta = bisect(grid[first - 1], grid[first])
            lower, lower_bracket = in_eta, (out_eta, in_eta)
        else:
            lower, lower_bracket = grid[0], (grid[0], grid[0])
        if last < grid.size - 1:
            out_eta, in_eta = bisect(grid[last + 1], grid[last])
            upper, upper_bracket = in_eta, (out_eta, in_eta)
        else:
            upper, upper_bracket = grid[-1], (grid[-1], grid[-1])

    return ConfidenceSet(
        eta_grid=grid,
        statistics=stats,
        critical_values=crits,
        accepted=accepted,
        infeasible=infeasible,
        lower=float(lower),
        upper=float(upper),
        lower_bracket=lower_bracket,
        upper_bracket=upper_bracket,
        contiguous=contiguous,
        empty=empty,
    )


# --- data-generating processes ----------------------------------------------


@dataclass(frozen=True)
class DgpSpec:
    """A simulation design: a model plus a way to draw samples from it."""

    name: str
    parameters: dict
    model: MomentModel
    h_coord: int
    eta0: float
    true_theta: str
    generator: Callable[[int, np.random.Generator], Sample]

    def restriction(self, eta: float | None = None) -> NullRestriction:
        value = self.eta0 if eta is None else float(eta)
        return NullRestriction.subvector(
            self.model.theta_box, {self.h_coord: value}
        )


def _failcase_dgp() -> DgpSpec:
    """Two opposing inequalities whose identified set is a line segment.

    W ~ N(0, I_2); m_1 = theta_1 + theta_2 - W_1 and m_2 = W_2 - theta_1
    - theta_2, so the identified set is theta_1 + theta_2 = 0 and the
    null theta_1 = 0 holds on the boundary.  The profiled statistic is
    asymptotically N(0, 1/2); the naive bootstrap fails here.
    """

    def matrix(rows: np.ndarray, theta: np.ndarray) -> np.ndarray:
        s = theta[0] + theta[1]
        return np.column_stack([s - rows[:, 0], rows[:, 1] - s])

    model = MomentModel(
        d_theta=2,
        p_ineq=2,
        p_eq=0,
        theta_box=np.array([[-1.0, 1.0], [-1.0, 1.0]]),
        matrix_fn=matrix,
        name="failcase",
    )

    def generator(n: int, rng: np.random.Generator) -> Sample:
        return Sample(rows=rng.standard_normal((n, 2)), column_names=("w1", "w2"))

    return DgpSpec(
        name="failcase",
        parameters={},
        model=model,
        h_coord=0,
        eta0=0.0,
        true_theta="identified set is the segment theta_1 + theta_2 = 0",
        generator=generator,
    )


def _box1d_dgp(mu: float = 0.0, sigma: float = 1.0, lo: float = -5.0, hi: float = 5.0) -> DgpSpec:
    """One inequality theta <= E[W] with adjustable slack.

    m(W, theta) = theta - W and W ~ N(mu, sigma^2): the null theta = eta
    holds for eta <= mu and is violated (with drift sqrt(n)(eta - mu))
    beyond, which makes simple power curves.
    """

    def matrix(rows: np.ndarray, theta: np.ndarray) -> np.ndarray:
        return (theta[0] - rows[:, 0])[:, None]

    model = MomentModel(
        d_theta=1,
        p_ineq=1,
        p_eq=0,
        theta_box=np.array([[lo, hi]]),
        matrix_fn=matrix,
        name="box1d",
    )

    def generator(n: int, rng: np.random.Generator) -> Sample:
        return Sample(
            rows=mu + sigma * rng.standard_normal((n, 1)), column_names=("w",)
        )

    return DgpSpec(
        name="box1d",
        parameters={"mu": mu, "sigma": sigma, "lo": lo, "hi": hi},
        model=model,
        h_coord=0,
        eta0=mu,
        true_theta=f"identified set is theta <= {mu}",
        generator=generator,
    )


_BUILTIN_DGPS: dict[str, Callable[..., DgpSpec]] = {
    "failcase": _failcase_dgp,
    "box1d": _box1d_dgp,
}


def register_dgp(name: str, factory: Callable[..., DgpSpec]) -> None:
    """Add a user design to the registry (overwrites quietly)."""
    _BUILTIN_DGPS[name] = factory


def available_dgps() -> tuple[str, ...]:
    return tuple(sorted(_BUILTIN_DGPS))


def builtin_dgp(name: str, **params) -> DgpSpec:
    try:
        factory = _BUILTIN_DGPS[name]
    except KeyError:
        raise KeyError(
            f"unknown DGP {name!r}; available: {available_dgps()}"
        ) from None
    return factory(**params)


# --- simulation harness -------------------------------------------------------


@dataclass(frozen=True)
class SimulationResult:
    """Rejection-rate estimate over independent simulated samples."""

    method: str
    alpha: float
    reps: int
    rejection_rate: float
    mc_stderr: float
    statistics: np.ndarray
    critical_values: np.ndarray
    rejects: np.ndarray
    rep_seeds: tuple[int, ...]


def simulate_rejection_rate(
    dgp: DgpSpec,
    n: int,
    method: str,
    alpha: float,
    reps: int,
    master_seed: int = 0,
    cfg: InferenceConfig | None = None,
    eta: float | None = None,
) -> SimulationResult:
    """Rejection rate of the test under the DGP's null at eta.

    Replicate r draws its sample from the stream (master_seed, data, r)
    and runs the test with the derived seed (master_seed, test, r); the
    reduction is index-ordered, so thread count cannot change any output.
    """
    if reps < 1:
        raise ValueError("need at least one replication")
    cfg = cfg or InferenceConfig()
    restriction = dgp.restriction(eta)

    def task(r: int) -> tuple[float, float, bool, int]:
        rng = substream(master_seed, TAG_DATA, r)
        sample = dgp.generator(n, rng)
        rep_seed = derive_seed(master_seed, TAG_TEST, r)
        report = run_test(
            dgp.model, sample, restriction, method, alpha, replace(cfg, seed=rep_seed)
        )
        return report.t_n, report.critical_value, report.reject, rep_seed

    rows = _map_ordered(task, list(range(reps)), cfg.threads)
    rejects = np.array([r[2] for r in rows], dtype=bool)
    rate = float(rejects.mean())
    return SimulationResult(
        method=method.lower(),
        alpha=alpha,
        reps=reps,
        rejection_rate=rate,
        mc_stderr=math.sqrt(rate * (1.0 - rate) / reps),
        statistics=np.array([r[0] for r in rows]),
        critical_values=np.array([r[1] for r in rows]),
        rejects=rejects,
        rep_seeds=tuple(r[3] for r in rows),
    )
