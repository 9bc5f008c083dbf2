"""Command-line interface.

Five subcommands: ``test`` runs one hypothesis test, ``cs`` inverts it
over a grid of null values, ``simulate`` estimates rejection rates on a
built-in design, ``tune`` reports the data-driven tuning quantities, and
``density`` tabulates the min-max Gaussian distribution.

Options come from an INI-style config file (``--config``), from flags,
or both; flags win.  Every run echoes its fully resolved configuration
to ``<out>_config.txt``, and feeding that file back reproduces the run
bit for bit.  All randomness flows from the single ``seed`` value.
CSV outputs use a fixed 17-significant-digit float format so results
are identical across thread counts and machines with the same BLAS.
"""

from __future__ import annotations

import argparse
import configparser
import csv
import math
import os
import sys
import time
from dataclasses import dataclass, field

import numpy as np

from .analytics import (
    MinMaxGaussianSpec,
    density_bounds,
    iid_normal_sampler,
    mc_minmax_density,
    minmax_cdf,
    minmax_density,
)
from .errors import (
    ConfigError,
    DataError,
    InfeasibleRestriction,
    MissingRequired,
    MomineqError,
    NonNumericCell,
    TooFewRows,
    TypeMismatch,
    UnknownKey,
)
from .inference import (
    METHODS,
    ConfidenceSet,
    InferenceConfig,
    available_dgps,
    builtin_dgp,
    confidence_set,
    run_test,
    simulate_rejection_rate,
    _map_ordered,
)
from .model import MomentModel, Sample, load_csv, standardize
from .optimize import NullRestriction, profile_min
from .statistic import stud_objective
from .streams import TAG_CLI_DATA, substream
from .tuning import default_wbar_gamma, estimate_wbar, rate_diagnostic, select_kappa
from . import figures

COMMANDS = ("test", "cs", "simulate", "tune", "density")

_GRID_TOL = 1e-9


# --- configuration ----------------------------------------------------------


@dataclass
class RunConfig:
    """Fully resolved options for one CLI run."""

    command: str = ""
    seed: int = 0
    out: str | None = None
    threads: int = 1
    figures: bool = True

    model_family: str | None = None
    model_params: dict[str, float] = field(default_factory=dict)
    table: str | None = None

    data_path: str | None = None
    data_n: int = 1000

    null_type: str = "subvector"
    coord: int = 0
    eta: float = 0.0
    a_matrix: str | None = None
    rhs: str | None = None

    method: str = "sn"
    alpha: float = 0.05
    b_draws: int = 1000
    kappa: float | None = None
    gamma: float | None = None
    margin: float | None = None
    centering: str = "plain"
    candidates: int = 192
    wbar_draws: int = 300
    scan_draws: int = 200
    c_exp: float = 0.1
    pr_mode: str = "candidates"
    sn_grid: int | None = None
    force_critical: float | None = None

    cs_lo: float = -1.0
    cs_hi: float = 1.0
    cs_points: int = 41

    sim_dgp: str | None = None
    sim_n: int = 1000
    sim_reps: int = 1000
    sim_eta: float | None = None

    dens_rows: int = 2
    dens_cols: int = 3
    dens_t: float | None = None
    dens_lo: float = -5.0
    dens_hi: float = 5.0
    dens_points: int = 401
    mc_draws: int = 0


# section -> key -> (RunConfig attribute, kind).  Kinds prefixed "opt"
# accept an empty value as None, which is how unset optionals round-trip
# through the echoed config file.
_SCHEMA: dict[str, dict[str, tuple[str, str]]] = {
    "run": {
        "command": ("command", "str"),
        "seed": ("seed", "int"),
        "out": ("out", "optstr"),
        "threads": ("threads", "int"),
        "figures": ("figures", "bool"),
    },
    "model": {
        "family": ("model_family", "optstr"),
        "table": ("table", "optstr"),
    },
    "data": {
        "path": ("data_path", "optstr"),
        "n": ("data_n", "int"),
    },
    "null": {
        "type": ("null_type", "str"),
        "coord": ("coord", "int"),
        "eta": ("eta", "float"),
        "a_matrix": ("a_matrix", "optstr"),
        "rhs": ("rhs", "optstr"),
    },
    "method": {
        "name": ("method", "str"),
        "alpha": ("alpha", "float"),
        "b": ("b_draws", "int"),
        "kappa": ("kappa", "optfloat"),
        "gamma": ("gamma", "optfloat"),
        "margin": ("margin", "optfloat"),
        "centering": ("centering", "str"),
        "candidates": ("candidates", "int"),
        "wbar_draws": ("wbar_draws", "int"),
        "scan_draws": ("scan_draws", "int"),
        "c_exp": ("c_exp", "float"),
        "pr_mode": ("pr_mode", "str"),
        "sn_grid": ("sn_grid", "optint"),
        "force_critical": ("force_critical", "optfloat"),
    },
    "cs": {
        "lo": ("cs_lo", "float"),
        "hi": ("cs_hi", "float"),
        "points": ("cs_points", "int"),
    },
    "simulate": {
        "dgp": ("sim_dgp", "optstr"),
        "n": ("sim_n", "int"),
        "reps": ("sim_reps", "int"),
        "eta": ("sim_eta", "optfloat"),
    },
    "density": {
        "n_rows": ("dens_rows", "int"),
        "p_cols": ("dens_cols", "int"),
        "t": ("dens_t", "optfloat"),
        "t_lo": ("dens_lo", "float"),
        "t_hi": ("dens_hi", "float"),
        "points": ("dens_points", "int"),
        "mc_draws": ("mc_draws", "int"),
    },
}

_TRUE = {"true", "1", "yes", "on"}
_FALSE = {"false", "0", "no", "off"}


def _convert(kind: str, raw: str, path: str):
    raw = raw.strip()
    optional = kind.startswith("opt")
    if optional:
        if raw == "":
            return None
        kind = kind[3:]
    if kind == "str":
        return raw
    if kind == "bool":
        low = raw.lower()
        if low in _TRUE:
            return True
        if low in _FALSE:
            return False
        raise TypeMismatch(path, "boolean", raw)
    try:
        if kind == "int":
            return int(raw)
        return float(raw)
    except ValueError:
        raise TypeMismatch(path, kind, raw) from None


def parse_config(
    command: str,
    config_path: str | None = None,
    overrides: dict[tuple[str, str], str] | None = None,
) -> RunConfig:
    """Resolve file values, then flag overrides, into a validated RunConfig.

    Unknown sections or keys are errors, as are values that do not parse
    to their declared type.  The [model] section additionally accepts
    free numeric keys, which are passed to the DGP family as parameters.
    """
    cfg = RunConfig(command=command)

    def apply(section: str, key: str, raw: str) -> None:
        if section == "run" and key == "command":
            return  # the subcommand on the command line is authoritative
        if section == "model" and key not in _SCHEMA["model"]:
            path = f"model.{key}"
            value = _convert("float", raw, path)
            cfg.model_params[key] = value
            return
        try:
            attr, kind = _SCHEMA[section][key]
        except KeyError:
            raise UnknownKey(f"{section}.{key}") from None
        setattr(cfg, attr, _convert(kind, raw, f"{section}.{key}"))

    if config_path is not None:
        parser = configparser.ConfigParser(
            interpolation=None, inline_comment_prefixes=("#",)
        )
        try:
            with open(config_path, encoding="utf-8") as fh:
                parser.read_file(fh)
        except OSError as exc:
            raise DataError(f"cannot read config file: {exc}") from exc
        except configparser.Error as exc:
            raise TypeMismatch("config file", "INI-style sections", str(exc)) from exc
        for section in parser.sections():
            if section not in _SCHEMA:
                raise UnknownKey(section)
            for key, raw in parser.items(section):
                apply(section, key, raw)

    for (section, key), raw in (overrides or {}).items():
        apply(section, key, raw)

    _validate(cfg)
    return cfg


def _require(cond: bool, key: str, expected: str, got) -> None:
    if not cond:
        raise TypeMismatch(key, expected, str(got))


def _validate(cfg: RunConfig) -> None:
    _require(cfg.command in COMMANDS, "run.command", f"one of {COMMANDS}", cfg.command)
    _require(cfg.threads >= 1, "run.threads", "int >= 1", cfg.threads)
    _require(cfg.data_n >= 2, "data.n", "int >= 2", cfg.data_n)
    _require(0.0 < cfg.alpha < 1.0, "method.alpha", "float in (0, 1)", cfg.alpha)
    _require(cfg.b_draws >= 1, "method.b", "int >= 1", cfg.b_draws)
    _require(cfg.candidates >= 1, "method.candidates", "int >= 1", cfg.candidates)
    _require(cfg.wbar_draws >= 1, "method.wbar_draws", "int >= 1", cfg.wbar_draws)
    _require(cfg.scan_draws >= 1, "method.scan_draws", "int >= 1", cfg.scan_draws)
    _require(
        cfg.method in METHODS, "method.name", f"one of {METHODS}", cfg.method
    )
    _require(
        cfg.centering in ("plain", "refined"),
        "method.centering",
        "plain or refined",
        cfg.centering,
    )
    _require(
        cfg.pr_mode in ("candidates", "reoptimize"),
        "method.pr_mode",
        "candidates or reoptimize",
        cfg.pr_mode,
    )
    _require(
        cfg.null_type in ("subvector", "affine"),
        "null.type",
        "subvector or affine",
        cfg.null_type,
    )

    needs_model = cfg.command in ("test", "cs", "tune")
    if needs_model and cfg.model_family is None and cfg.table is None:
        raise MissingRequired("model.family")
    if cfg.command == "cs":
        _require(cfg.cs_points >= 1, "cs.points", "int >= 1", cfg.cs_points)
        _require(cfg.cs_lo < cfg.cs_hi, "cs.lo", "lo < hi", (cfg.cs_lo, cfg.cs_hi))
        _require(
            cfg.null_type == "subvector",
            "null.type",
            "subvector (cs inverts a scalar null)",
            cfg.null_type,
        )
    if cfg.command == "simulate":
        if cfg.sim_dgp is None and cfg.model_family is None:
            raise MissingRequired("simulate.dgp")
        _require(cfg.sim_reps >= 1, "simulate.reps", "int >= 1", cfg.sim_reps)
        _require(cfg.sim_n >= 2, "simulate.n", "int >= 2", cfg.sim_n)
    if cfg.command == "density":
        _require(cfg.dens_rows >= 1, "density.n_rows", "int >= 1", cfg.dens_rows)
        _require(cfg.dens_cols >= 1, "density.p_cols", "int >= 1", cfg.dens_cols)
        _require(cfg.dens_points >= 2, "density.points", "int >= 2", cfg.dens_points)
        _require(
            cfg.dens_lo < cfg.dens_hi, "density.t_lo", "t_lo < t_hi", (cfg.dens_lo, cfg.dens_hi)
        )
        _require(cfg.mc_draws >= 0, "density.mc_draws", "int >= 0", cfg.mc_draws)

    for path_key, value in (("data.path", cfg.data_path), ("model.table", cfg.table)):
        if value is not None and not os.path.exists(value):
            raise DataError(f"{path_key} refers to a missing file: {value}")


_ECHO_SECTIONS = {
    "test": ("run", "model", "data", "null", "method"),
    "tune": ("run", "model", "data", "null", "method"),
    "cs": ("run", "model", "data", "null", "method", "cs"),
    "simulate": ("run", "model", "simulate", "method"),
    "density": ("run", "density"),
}


def _fmt(value) -> str:
    """One cell: bools as 0/1, floats at 17 significant digits."""
    if isinstance(value, (bool, np.bool_)):
        return "1" if value else "0"
    if isinstance(value, (int, np.integer)):
        return str(int(value))
    if isinstance(value, (float, np.floating)):
        return format(float(value), ".17g")
    return str(value)


def _echo_fmt(value) -> str:
    if value is None:
        return ""
    if isinstance(value, bool):
        return "true" if value else "false"
    return _fmt(value)


def write_config(cfg: RunConfig, path: str) -> None:
    """Echo the resolved configuration as a config file that round-trips."""
    parser = configparser.ConfigParser(interpolation=None)
    for section in _ECHO_SECTIONS[cfg.command]:
        parser.add_section(section)
        for key, (attr, _) in _SCHEMA[section].items():
            parser.set(section, key, _echo_fmt(getattr(cfg, attr)))
        if section == "model":
            for key, value in sorted(cfg.model_params.items()):
                parser.set(section, key, _echo_fmt(value))
    parser.set("run", "command", cfg.command)
    with open(path, "w", encoding="utf-8") as fh:
        parser.write(fh)


# --- problem assembly --------------------------------------------------------


def load_table(path: str) -> tuple[MomentModel, Sample, np.ndarray]:
    """Load a tabulated model: precomputed moments on a finite theta grid.

    Expected columns: ``point`` (grid point id), ``theta_1..theta_d``
    (constant within a point), and ``m_1..m_p`` (one row per
    observation).  Every point must tabulate the same number of rows, in
    the same observation order; inference then treats the grid as the
    whole parameter space, which makes this a grid-approximation mode.
    """
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        try:
            header = [h.strip() for h in next(reader)]
        except StopIteration:
            raise TooFewRows(0) from None
        rows = [r for r in reader if r and any(c.strip() for c in r)]

    def indexed(prefix: str) -> list[int]:
        cols = []
        k = 1
        while f"{prefix}{k}" in header:
            cols.append(header.index(f"{prefix}{k}"))
            k += 1
        return cols

    if "point" not in header:
        raise DataError("tabulated model needs a 'point' column")
    point_idx = header.index("point")
    theta_idx = indexed("theta_")
    m_idx = indexed("m_")
    if not theta_idx:
        raise DataError("tabulated model needs theta_1..theta_d columns")
    if not m_idx:
        raise DataError("tabulated model needs m_1..m_p columns")

    def cell(row_no: int, row: list[str], col: int) -> float:
        name = header[col]
        raw = row[col].strip() if col < len(row) else ""
        try:
            value = float(raw)
        except ValueError:
            raise NonNumericCell(row_no, name, raw) from None
        if not math.isfinite(value):
            raise NonNumericCell(row_no, name, raw)
        return value

    groups: dict[str, list[tuple[tuple[float, ...], tuple[float, ...]]]] = {}
    order: list[str] = []
    for row_no, row in enumerate(rows, start=1):
        pid = row[point_idx].strip() if point_idx < len(row) else ""
        if pid not in groups:
            groups[pid] = []
            order.append(pid)
        theta = tuple(cell(row_no, row, c) for c in theta_idx)
        moments = tuple(cell(row_no, row, c) for c in m_idx)
        groups[pid].append((theta, moments))

    sizes = {len(g) for g in groups.values()}
    if len(sizes) > 1:
        raise DataError(
            f"tabulated points have unequal row counts: {sorted(sizes)}"
        )
    n = sizes.pop()
    if n < 2:
        raise TooFewRows(n)

    thetas = []
    blocks: dict[bytes, np.ndarray] = {}
    for pid in order:
        entries = groups[pid]
        theta_vals = {e[0] for e in entries}
        if len(theta_vals) > 1:
            raise DataError(
                f"tabulated point {pid!r} has varying theta values"
            )
        theta = np.array(entries[0][0], dtype=float)
        key = theta.tobytes()
        if key in blocks:
            raise DataError(
                f"tabulated point {pid!r} repeats an earlier theta value"
            )
        blocks[key] = np.array([e[1] for e in entries], dtype=float)
        thetas.append(theta)
    grid = np.asarray(thetas)

    box = np.column_stack([grid.min(axis=0), grid.max(axis=0)])

    def matrix(obs: np.ndarray, theta: np.ndarray) -> np.ndarray:
        block = blocks.get(np.asarray(theta, dtype=float).tobytes())
        if block is None:
            raise ValueError("theta is not a tabulated grid point")
        return block

    model = MomentModel(
        d_theta=grid.shape[1],
        p_ineq=len(m_idx),
        p_eq=0,
        theta_box=box,
        matrix_fn=matrix,
        name="tabulated",
    )
    sample = Sample(
        rows=np.arange(n, dtype=float)[:, None], column_names=("row",)
    )
    return model, sample, grid


def _make_dgp(cfg: RunConfig):
    family = cfg.model_family
    try:
        return builtin_dgp(family, **cfg.model_params)
    except KeyError:
        raise TypeMismatch(
            "model.family", f"one of {available_dgps()}", str(family)
        ) from None
    except TypeError:
        raise UnknownKey(f"model.{sorted(cfg.model_params)}") from None


def _build_problem(cfg: RunConfig):
    """Model, sample, and theta grid (tabulated mode only) for the run."""
    if cfg.table is not None:
        return load_table(cfg.table)
    dgp = _make_dgp(cfg)
    if cfg.data_path is not None:
        probe = dgp.generator(2, substream(0, TAG_CLI_DATA))
        sample = load_csv(cfg.data_path, schema=probe.column_names)
    else:
        sample = dgp.generator(cfg.data_n, substream(cfg.seed, TAG_CLI_DATA))
    return dgp.model, sample, None


def _parse_matrix(raw: str, key: str) -> np.ndarray:
    rows = [r.strip() for r in raw.split(";") if r.strip()]
    parsed = []
    for r in rows:
        try:
            parsed.append([float(x) for x in r.replace(",", " ").split()])
        except ValueError:
            raise TypeMismatch(key, "numeric matrix", raw) from None
    if not parsed or len({len(r) for r in parsed}) > 1:
        raise TypeMismatch(key, "rectangular matrix", raw)
    return np.asarray(parsed, dtype=float)


def _restriction(cfg: RunConfig, model: MomentModel, grid: np.ndarray | None):
    _require(
        0 <= cfg.coord < model.d_theta,
        "null.coord",
        f"int in [0, {model.d_theta - 1}]",
        cfg.coord,
    )
    if grid is not None:
        mask = np.abs(grid[:, cfg.coord] - cfg.eta) <= _GRID_TOL
        if not mask.any():
            raise InfeasibleRestriction(
                f"no tabulated point has theta_{cfg.coord + 1} = {cfg.eta}"
            )
        return NullRestriction.discrete_set(grid[mask], eta=cfg.eta)
    if cfg.null_type == "affine":
        if cfg.a_matrix is None or cfg.rhs is None:
            raise MissingRequired("null.a_matrix")
        a = _parse_matrix(cfg.a_matrix, "null.a_matrix")
        rhs = _parse_matrix(cfg.rhs, "null.rhs").ravel()
        return NullRestriction.affine_set(model.theta_box, a, rhs)
    return NullRestriction.subvector(model.theta_box, {cfg.coord: cfg.eta})


def _inference_cfg(cfg: RunConfig) -> InferenceConfig:
    return InferenceConfig(
        b_draws=cfg.b_draws,
        seed=cfg.seed,
        kappa=cfg.kappa,
        gamma=cfg.gamma,
        margin=cfg.margin,
        centering=cfg.centering,
        wbar_draws=cfg.wbar_draws,
        scan_draws=cfg.scan_draws,
        c_exp=cfg.c_exp,
        candidates=cfg.candidates,
        sn_grid_points=cfg.sn_grid,
        pr_mode=cfg.pr_mode,
        force_critical=cfg.force_critical,
        threads=cfg.threads,
    )


# --- output helpers -----------------------------------------------------------


def _out_prefix(cfg: RunConfig) -> str:
    out = cfg.out or f"momineq_{cfg.command}"
    parent = os.path.dirname(out)
    if parent:
        os.makedirs(parent, exist_ok=True)
    return out


def _write_csv(path: str, header: list[str], rows: list[list]) -> None:
    with open(path, "w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(header)
        for row in rows:
            writer.writerow([_fmt(v) for v in row])


def _block(title: str, pairs: list[tuple[str, object]]) -> str:
    width = max(len(k) for k, _ in pairs)
    lines = [f"== momineq {title} =="]
    lines += [f"{k.ljust(width)}  {_fmt(v)}" for k, v in pairs]
    lines.append("== end ==")
    return "\n".join(lines)


def _emit(cfg: RunConfig, out: str, text: str, warnings=()) -> None:
    with open(f"{out}_report.txt", "w", encoding="utf-8") as fh:
        fh.write(text + "\n")
        for w in warnings:
            fh.write(f"warning: {w}\n")
    print(text)
    for w in warnings:
        print(f"warning: {w}", file=sys.stderr)


def _vector_cols(prefix: str, vec: np.ndarray) -> list[tuple[str, float]]:
    vec = np.atleast_1d(np.asarray(vec, dtype=float))
    return [(f"{prefix}_{i + 1}", float(v)) for i, v in enumerate(vec)]


# --- command handlers ----------------------------------------------------------


def _tuning_pairs(report) -> list[tuple[str, object]]:
    if report is None:
        nan = math.nan
        return [
            ("wbar", nan),
            ("gamma_used", nan),
            ("m_n", nan),
            ("kappa_n", nan),
            ("ac_at_kappa", nan),
            ("delta_floor", nan),
            ("diagnostic", nan),
            ("kappa_satisfied", True),
        ]
    return [
        ("wbar", report.wbar),
        ("gamma_used", report.gamma_used),
        ("m_n", report.m_n),
        ("kappa_n", report.kappa_n),
        ("ac_at_kappa", report.ac_at_kappa),
        ("delta_floor", report.delta_floor),
        ("diagnostic", report.diagnostic),
        ("kappa_satisfied", report.kappa_satisfied),
    ]


def _cmd_test(cfg: RunConfig) -> int:
    model, sample, grid = _build_problem(cfg)
    restriction = _restriction(cfg, model, grid)
    report = run_test(
        model, sample, restriction, cfg.method, cfg.alpha, _inference_cfg(cfg)
    )
    out = _out_prefix(cfg)

    pairs: list[tuple[str, object]] = [
        ("command", "test"),
        ("method", report.method),
        ("alpha", report.alpha),
    ]
    pairs += _vector_cols("eta", report.eta)
    pairs += [
        ("statistic", report.t_n),
        ("critical_value", report.critical_value),
        ("reject", report.reject),
    ]
    pairs += _vector_cols("theta_hat", report.theta_hat)
    pairs += _tuning_pairs(report.tuning)
    pairs += [("n", sample.n), ("b_draws", report.b_draws), ("seed", report.seed)]

    csv_pairs = [(k, v) for k, v in pairs if k != "command"]
    _write_csv(
        f"{out}_report.csv", [k for k, _ in csv_pairs], [[v for _, v in csv_pairs]]
    )
    _emit(cfg, out, _block("test summary", pairs), report.warnings)

    if cfg.figures:
        stud = standardize(model, sample, report.theta_hat).stud
        m_n = report.tuning.m_n if report.tuning else math.nan
        figures.stud_figure(
            stud, m_n, report.t_n, report.critical_value, f"{out}_stud.png"
        )
    print(f"elapsed {report.elapsed_s:.2f}s", file=sys.stderr)
    return 0


def _cs_rows_csv(out: str, eta, stats, crits, accepted, infeasible) -> None:
    rows = [
        [eta[i], stats[i], crits[i], bool(accepted[i]), bool(infeasible[i])]
        for i in range(len(eta))
    ]
    _write_csv(
        f"{out}_cs.csv",
        ["eta", "statistic", "critical_value", "accepted", "infeasible"],
        rows,
    )


def _tabulated_cs(cfg: RunConfig, model, sample, grid) -> ConfidenceSet:
    """Grid inversion restricted to the tabulated theta values."""
    values = np.unique(grid[:, cfg.coord])
    inf_cfg = _inference_cfg(cfg)

    def evaluate(eta: float):
        points = grid[np.abs(grid[:, cfg.coord] - eta) <= _GRID_TOL]
        restriction = NullRestriction.discrete_set(points, eta=eta)
        report = run_test(model, sample, restriction, cfg.method, cfg.alpha, inf_cfg)
        return report.t_n, report.critical_value, report.reject

    rows = _map_ordered(evaluate, list(values), cfg.threads)
    stats = np.array([r[0] for r in rows])
    crits = np.array([r[1] for r in rows])
    accepted = np.array([not r[2] for r in rows])
    idx = np.flatnonzero(accepted)
    empty = idx.size == 0
    contiguous = (not empty) and bool(np.all(np.diff(idx) == 1))
    lower = float(values[idx[0]]) if not empty else math.nan
    upper = float(values[idx[-1]]) if not empty else math.nan
    return ConfidenceSet(
        eta_grid=values,
        statistics=stats,
        critical_values=crits,
        accepted=accepted,
        infeasible=np.zeros(values.size, dtype=bool),
        lower=lower,
        upper=upper,
        lower_bracket=(lower, lower),
        upper_bracket=(upper, upper),
        contiguous=contiguous,
        empty=empty,
    )


def _cmd_cs(cfg: RunConfig) -> int:
    t0 = time.perf_counter()
    model, sample, grid = _build_problem(cfg)
    out = _out_prefix(cfg)
    dims = grid.shape[1] if grid is not None else model.d_theta
    _require(
        0 <= cfg.coord < dims, "null.coord", f"int in [0, {dims - 1}]", cfg.coord
    )
    if grid is not None:
        cs = _tabulated_cs(cfg, model, sample, grid)
    else:
        eta_grid = np.linspace(cfg.cs_lo, cfg.cs_hi, cfg.cs_points)
        cs = confidence_set(
            model,
            sample,
            cfg.coord,
            cfg.alpha,
            cfg.method,
            eta_grid,
            _inference_cfg(cfg),
        )

    _cs_rows_csv(out, cs.eta_grid, cs.statistics, cs.critical_values, cs.accepted, cs.infeasible)
    pairs: list[tuple[str, object]] = [
        ("command", "cs"),
        ("method", cfg.method),
        ("alpha", cfg.alpha),
        ("grid_lo", float(cs.eta_grid[0])),
        ("grid_hi", float(cs.eta_grid[-1])),
        ("grid_points", int(cs.eta_grid.size)),
        ("lower", cs.lower),
        ("upper", cs.upper),
        ("lower_bracket_lo", cs.lower_bracket[0]),
        ("lower_bracket_hi", cs.lower_bracket[1]),
        ("upper_bracket_lo", cs.upper_bracket[0]),
        ("upper_bracket_hi", cs.upper_bracket[1]),
        ("contiguous", cs.contiguous),
        ("empty", cs.empty),
        ("n", sample.n),
        ("b_draws", cfg.b_draws),
        ("seed", cfg.seed),
    ]
    csv_pairs = [(k, v) for k, v in pairs if k != "command"]
    _write_csv(
        f"{out}_cs_summary.csv",
        [k for k, _ in csv_pairs],
        [[v for _, v in csv_pairs]],
    )
    warn = () if cs.contiguous or cs.empty else (
        "accepted grid points are not contiguous; reported bounds cover "
        "the outermost accepted points only",
    )
    _emit(cfg, out, _block("cs summary", pairs), warn)
    if cfg.figures:
        figures.cs_figure(
            cs.eta_grid,
            cs.statistics,
            cs.critical_values,
            cs.accepted,
            cfg.alpha,
            f"{out}_cs.png",
        )
    print(f"elapsed {time.perf_counter() - t0:.2f}s", file=sys.stderr)
    return 0


def _cmd_simulate(cfg: RunConfig) -> int:
    t0 = time.perf_counter()
    name = cfg.sim_dgp or cfg.model_family
    try:
        dgp = builtin_dgp(name, **cfg.model_params)
    except KeyError:
        raise TypeMismatch(
            "simulate.dgp", f"one of {available_dgps()}", str(name)
        ) from None
    except TypeError:
        raise UnknownKey(f"model.{sorted(cfg.model_params)}") from None
    result = simulate_rejection_rate(
        dgp,
        cfg.sim_n,
        cfg.method,
        cfg.alpha,
        cfg.sim_reps,
        master_seed=cfg.seed,
        cfg=_inference_cfg(cfg),
        eta=cfg.sim_eta,
    )
    out = _out_prefix(cfg)
    _write_csv(
        f"{out}_reps.csv",
        ["rep", "rep_seed", "statistic", "critical_value", "reject"],
        [
            [
                r,
                result.rep_seeds[r],
                result.statistics[r],
                result.critical_values[r],
                bool(result.rejects[r]),
            ]
            for r in range(result.reps)
        ],
    )
    pairs: list[tuple[str, object]] = [
        ("command", "simulate"),
        ("dgp", dgp.name),
        ("method", result.method),
        ("alpha", result.alpha),
        ("eta", cfg.sim_eta if cfg.sim_eta is not None else dgp.eta0),
        ("n", cfg.sim_n),
        ("reps", result.reps),
        ("rejection_rate", result.rejection_rate),
        ("mc_stderr", result.mc_stderr),
        ("median_statistic", float(np.median(result.statistics))),
        ("median_critical", float(np.median(result.critical_values))),
        ("b_draws", cfg.b_draws),
        ("seed", cfg.seed),
    ]
    csv_pairs = [(k, v) for k, v in pairs if k not in ("command", "dgp", "method")]
    _write_csv(
        f"{out}_summary.csv",
        ["dgp", "method"] + [k for k, _ in csv_pairs],
        [[dgp.name, result.method] + [v for _, v in csv_pairs]],
    )
    warn = (
        ("the NAIVE method is invalid and over-rejects; shown for illustration",)
        if result.method == "naive"
        else ()
    )
    _emit(cfg, out, _block("simulate summary", pairs), warn)
    if cfg.figures:
        figures.simulate_figure(
            result.statistics,
            result.critical_values,
            result.rejection_rate,
            f"{out}_reps.png",
        )
    print(f"elapsed {time.perf_counter() - t0:.2f}s", file=sys.stderr)
    return 0


def _cmd_tune(cfg: RunConfig) -> int:
    t0 = time.perf_counter()
    model, sample, grid = _build_problem(cfg)
    restriction = _restriction(cfg, model, grid)
    n = sample.n
    fit = profile_min(stud_objective(model, sample), restriction, InferenceConfig().optim)
    gamma = cfg.gamma if cfg.gamma is not None else default_wbar_gamma(n)
    wbar = estimate_wbar(
        model,
        sample,
        restriction,
        draws=cfg.wbar_draws,
        gamma=gamma,
        seed=cfg.seed,
        candidates=cfg.candidates,
        argmin_points=fit.argmin_set,
    )
    margin = cfg.margin if cfg.margin is not None else wbar * math.log(n)
    delta_floor = 1.0 / math.sqrt(n)
    sel = select_kappa(
        model,
        sample,
        restriction,
        wbar,
        draws=cfg.scan_draws,
        c_exp=cfg.c_exp,
        seed=cfg.seed,
        alpha=cfg.alpha,
        centering=cfg.centering,
        candidates=cfg.candidates,
        argmin_points=fit.argmin_set,
        delta_floor=delta_floor,
    )
    diagnostic = rate_diagnostic(
        model.p, model.d_theta, n, sel.kappa_n, wbar, sel.ac_at_kappa
    )
    out = _out_prefix(cfg)
    pairs: list[tuple[str, object]] = [
        ("command", "tune"),
        ("alpha", cfg.alpha),
        ("n", n),
        ("wbar", wbar),
        ("gamma_used", gamma),
        ("m_n", margin),
        ("kappa_n", sel.kappa_n),
        ("ac_at_kappa", sel.ac_at_kappa),
        ("delta_floor", delta_floor),
        ("diagnostic", diagnostic),
        ("kappa_satisfied", sel.satisfied),
        ("wbar_draws", cfg.wbar_draws),
        ("scan_draws", cfg.scan_draws),
        ("c_exp", cfg.c_exp),
        ("seed", cfg.seed),
    ]
    csv_pairs = [(k, v) for k, v in pairs if k != "command"]
    _write_csv(
        f"{out}_tuning.csv", [k for k, _ in csv_pairs], [[v for _, v in csv_pairs]]
    )
    _write_csv(
        f"{out}_kappa_scan.csv",
        ["kappa", "critical_value", "anti_concentration"],
        [
            [sel.grid[i], sel.c_grid[i], sel.ac_grid[i]]
            for i in range(len(sel.grid))
        ],
    )
    warn = () if sel.satisfied else (
        "no grid kappa satisfied the selection rule; fallback sqrt(n)/log(n)",
    )
    _emit(cfg, out, _block("tune summary", pairs), warn)
    if cfg.figures:
        figures.kappa_figure(
            sel.grid, sel.c_grid, sel.ac_grid, sel.kappa_n, f"{out}_kappa.png"
        )
    print(f"elapsed {time.perf_counter() - t0:.2f}s", file=sys.stderr)
    return 0


def _cmd_density(cfg: RunConfig) -> int:
    t0 = time.perf_counter()
    spec = MinMaxGaussianSpec(n_rows=cfg.dens_rows, p_cols=cfg.dens_cols)
    bounds = density_bounds(spec)
    out = _out_prefix(cfg)

    if cfg.dens_t is not None:
        t = float(cfg.dens_t)
        f = float(minmax_density(spec, t))
        big_f = float(minmax_cdf(spec, t))
        _write_csv(f"{out}_density.csv", ["t", "f", "F"], [[t, f, big_f]])
        print(f"f({_fmt(t)}) = {f:.9f}")
        pairs = [
            ("command", "density"),
            ("n_rows", spec.n_rows),
            ("p_cols", spec.p_cols),
            ("t", t),
            ("f", f),
            ("F", big_f),
        ]
    else:
        grid = np.linspace(cfg.dens_lo, cfg.dens_hi, cfg.dens_points)
        f = minmax_density(spec, grid)
        big_f = minmax_cdf(spec, grid)
        _write_csv(
            f"{out}_density.csv",
            ["t", "f", "F"],
            [[grid[i], f[i], big_f[i]] for i in range(grid.size)],
        )
        mc = None
        if cfg.mc_draws > 0:
            mc = mc_minmax_density(
                iid_normal_sampler(spec),
                draws=cfg.mc_draws,
                grid=grid,
                seed=cfg.seed,
            )
            _write_csv(
                f"{out}_density_mc.csv",
                ["t", "f_mc"],
                [[grid[i], mc.density[i]] for i in range(grid.size)],
            )
        if cfg.figures:
            figures.density_figure(
                grid,
                f,
                big_f,
                bounds.upper,
                bounds.lower,
                f"{out}_density.png",
                mc_grid=None if mc is None else grid,
                mc_density=None if mc is None else mc.density,
            )
        pairs = [
            ("command", "density"),
            ("n_rows", spec.n_rows),
            ("p_cols", spec.p_cols),
            ("t_lo", float(grid[0])),
            ("t_hi", float(grid[-1])),
            ("points", int(grid.size)),
        ]

    _write_csv(
        f"{out}_bounds.csv",
        ["n_rows", "p_cols", "upper", "lower", "hypothesis_ok", "t_lo", "t_hi", "points"],
        [[
            spec.n_rows,
            spec.p_cols,
            bounds.upper,
            bounds.lower,
            bounds.hypothesis_ok,
            cfg.dens_lo if cfg.dens_t is None else cfg.dens_t,
            cfg.dens_hi if cfg.dens_t is None else cfg.dens_t,
            cfg.dens_points if cfg.dens_t is None else 1,
        ]],
    )
    pairs += [
        ("upper", bounds.upper),
        ("lower", bounds.lower),
        ("hypothesis_ok", bounds.hypothesis_ok),
    ]
    warn = () if bounds.hypothesis_ok else (
        "peak bounds hypothesis fails for this (N, p); bounds are not guaranteed",
    )
    _emit(cfg, out, _block("density summary", pairs), warn)
    print(f"elapsed {time.perf_counter() - t0:.2f}s", file=sys.stderr)
    return 0


_HANDLERS = {
    "test": _cmd_test,
    "cs": _cmd_cs,
    "simulate": _cmd_simulate,
    "tune": _cmd_tune,
    "density": _cmd_density,
}


# --- argument parsing -----------------------------------------------------------

# flag destination -> (section, key); command-dependent flags resolved in
# _overrides_from_flags.
_FLAG_MAP = {
    "seed": ("run", "seed"),
    "out": ("run", "out"),
    "threads": ("run", "threads"),
    "family": ("model", "family"),
    "table": ("model", "table"),
    "data": ("data", "path"),
    "null_type": ("null", "type"),
    "coord": ("null", "coord"),
    "a_matrix": ("null", "a_matrix"),
    "rhs": ("null", "rhs"),
    "method": ("method", "name"),
    "alpha": ("method", "alpha"),
    "b": ("method", "b"),
    "kappa": ("method", "kappa"),
    "gamma": ("method", "gamma"),
    "margin": ("method", "margin"),
    "centering": ("method", "centering"),
    "candidates": ("method", "candidates"),
    "wbar_draws": ("method", "wbar_draws"),
    "scan_draws": ("method", "scan_draws"),
    "c_exp": ("method", "c_exp"),
    "pr_mode": ("method", "pr_mode"),
    "sn_grid": ("method", "sn_grid"),
    "force_critical": ("method", "force_critical"),
    "lo": ("cs", "lo"),
    "hi": ("cs", "hi"),
    "dgp": ("simulate", "dgp"),
    "reps": ("simulate", "reps"),
    "N": ("density", "n_rows"),
    "p": ("density", "p_cols"),
    "t": ("density", "t"),
    "t_lo": ("density", "t_lo"),
    "t_hi": ("density", "t_hi"),
    "mc_draws": ("density", "mc_draws"),
}


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="momineq",
        description=(
            "Tests and confidence sets for a function of a partially "
            "identified parameter under many moment inequalities."
        ),
    )
    sub = parser.add_subparsers(dest="command", required=True)
    per_command = {
        "test": "run one hypothesis test",
        "cs": "invert the test over a grid of null values",
        "simulate": "estimate rejection rates on a built-in design",
        "tune": "report data-driven tuning quantities",
        "density": "tabulate the min-max Gaussian density and CDF",
    }
    for name, help_text in per_command.items():
        p = sub.add_parser(name, help=help_text)
        p.add_argument("--config", help="INI config file; flags override it")
        p.add_argument("--seed")
        p.add_argument("--out")
        p.add_argument("--threads")
        p.add_argument("--no-figures", action="store_true")
        if name in ("test", "cs", "tune"):
            p.add_argument("--family")
            p.add_argument("--table")
            p.add_argument("--data")
            p.add_argument("--n")
            p.add_argument("--null-type", dest="null_type")
            p.add_argument("--coord")
            p.add_argument("--eta")
            p.add_argument("--a-matrix", dest="a_matrix")
            p.add_argument("--rhs")
        if name in ("test", "cs", "simulate", "tune"):
            p.add_argument("--method")
            p.add_argument("--alpha")
            p.add_argument("--b")
            p.add_argument("--kappa")
            p.add_argument("--gamma")
            p.add_argument("--margin")
            p.add_argument("--centering")
            p.add_argument("--candidates")
            p.add_argument("--wbar-draws", dest="wbar_draws")
            p.add_argument("--scan-draws", dest="scan_draws")
            p.add_argument("--c-exp", dest="c_exp")
            p.add_argument("--pr-mode", dest="pr_mode")
            p.add_argument("--sn-grid", dest="sn_grid")
            p.add_argument("--force-critical", dest="force_critical")
        if name == "cs":
            p.add_argument("--lo")
            p.add_argument("--hi")
            p.add_argument("--points")
        if name == "simulate":
            p.add_argument("--dgp")
            p.add_argument("--family")
            p.add_argument("--n")
            p.add_argument("--reps")
            p.add_argument("--eta")
        if name == "density":
            p.add_argument("--N")
            p.add_argument("--p")
            p.add_argument("--t")
            p.add_argument("--t-lo", dest="t_lo")
            p.add_argument("--t-hi", dest="t_hi")
            p.add_argument("--points")
            p.add_argument("--mc-draws", dest="mc_draws")
    return parser


def _overrides_from_flags(ns: argparse.Namespace) -> dict[tuple[str, str], str]:
    overrides: dict[tuple[str, str], str] = {}
    command = ns.command
    for dest, value in vars(ns).items():
        if dest in ("command", "config", "no_figures") or value is None:
            continue
        if dest == "n":
            target = ("simulate", "n") if command == "simulate" else ("data", "n")
        elif dest == "eta":
            target = ("simulate", "eta") if command == "simulate" else ("null", "eta")
        elif dest == "points":
            target = ("density", "points") if command == "density" else ("cs", "points")
        else:
            target = _FLAG_MAP[dest]
        overrides[target] = str(value)
    if ns.no_figures:
        overrides[("run", "figures")] = "false"
    return overrides


def main(argv=None) -> int:
    argv = list(sys.argv[1:] if argv is None else argv)
    parser = _build_parser()
    if not argv:
        parser.print_usage(sys.stderr)
        return 2
    try:
        ns = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    try:
        cfg = parse_config(ns.command, ns.config, _overrides_from_flags(ns))
        out = _out_prefix(cfg)
        write_config(cfg, f"{out}_config.txt")
        return _HANDLERS[cfg.command](cfg)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2
    except (DataError, OSError) as exc:
        print(f"data error: {exc}", file=sys.stderr)
        return 3
    except MomineqError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except Exception as exc:  # pragma: no cover - defensive
        print(f"internal error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
