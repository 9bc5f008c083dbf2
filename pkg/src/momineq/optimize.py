"""Profiled minimization of a max-of-moments objective over the null set.

The null set Theta(eta) is a box intersected with either pinned
coordinates (subvector nulls), an affine system A theta = rhs, or an
explicit finite list of points (tabulated models).  ``profile_min`` runs a
deterministic multistart simplex descent over the free coordinates and
returns the smallest max-coordinate of the objective together with where
it was attained.

Determinism contract: with a fixed config the result is bit-identical from
run to run.  Starts come from a seeded low-discrepancy sequence, every
candidate is evaluated in a fixed order, and ties between starts go to the
earliest evaluation.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np
from scipy import optimize as _sciopt
from scipy.stats import qmc

from .errors import EmptyGrid, InfeasibleRestriction, NoFiniteValue

Objective = Callable[[np.ndarray], np.ndarray]

_FEAS_TOL = 1e-9


def _alternating_projection(
    theta: np.ndarray,
    box: np.ndarray,
    a_mat: np.ndarray,
    a_pinv: np.ndarray,
    rhs: np.ndarray,
    iters: int = 200,
) -> np.ndarray | None:
    """Project onto (box intersect affine) by alternating projections.

    Both sets are convex, so the iteration converges whenever the
    intersection is nonempty; returns None when the tolerance is not met.
    """
    t = theta.astype(float, copy=True)
    for _ in range(iters):
        t = np.clip(t, box[:, 0], box[:, 1])
        resid = a_mat @ t - rhs
        if (
            np.abs(resid).max(initial=0.0) <= _FEAS_TOL
            and (t >= box[:, 0] - _FEAS_TOL).all()
            and (t <= box[:, 1] + _FEAS_TOL).all()
        ):
            return np.clip(t, box[:, 0], box[:, 1])
        t = t - a_pinv @ resid
    return None


@dataclass(frozen=True)
class NullRestriction:
    """The feasible parameter set of a null hypothesis h(theta) = eta."""

    eta: np.ndarray
    box: np.ndarray
    fixed: tuple[tuple[int, float], ...] | None = None
    affine: tuple[np.ndarray, np.ndarray] | None = None
    discrete: np.ndarray | None = None
    free_dims: int = 0
    _origin: np.ndarray | None = None
    _basis: np.ndarray | None = None

    # --- constructors -----------------------------------------------------

    @classmethod
    def subvector(
        cls,
        theta_box: np.ndarray,
        pins: dict[int, float],
        eta: np.ndarray | float | None = None,
    ) -> "NullRestriction":
        """Pin the listed coordinates; the rest stay free inside the box."""
        box = np.array(theta_box, dtype=float)
        d = box.shape[0]
        if not pins:
            raise ValueError("subvector restriction needs at least one pin")
        for coord, value in pins.items():
            if not 0 <= coord < d:
                raise ValueError(f"pinned coordinate {coord} out of range")
            lo, hi = box[coord]
            if value < lo - _FEAS_TOL or value > hi + _FEAS_TOL:
                raise InfeasibleRestriction(
                    f"pinned value theta[{coord}] = {value} outside [{lo}, {hi}]"
                )
            box[coord] = (value, value)
        fixed = tuple(sorted(pins.items()))
        if eta is None:
            eta = np.array([v for _, v in fixed])
        return cls(
            eta=np.atleast_1d(np.asarray(eta, dtype=float)),
            box=box,
            fixed=fixed,
            free_dims=d - len(fixed),
        )

    @classmethod
    def affine_set(
        cls,
        theta_box: np.ndarray,
        a_mat: np.ndarray,
        rhs: np.ndarray,
    ) -> "NullRestriction":
        """Restrict to {theta in box : A theta = rhs}."""
        box = np.array(theta_box, dtype=float)
        a_mat = np.atleast_2d(np.asarray(a_mat, dtype=float))
        rhs = np.atleast_1d(np.asarray(rhs, dtype=float))
        d = box.shape[0]
        if a_mat.shape != (rhs.shape[0], d):
            raise ValueError("affine system shape mismatch")
        sol, _, rank, sv = np.linalg.lstsq(a_mat, rhs, rcond=None)
        if np.abs(a_mat @ sol - rhs).max(initial=0.0) > 1e-8 * (
            1.0 + np.abs(rhs).max(initial=0.0)
        ):
            raise InfeasibleRestriction("affine system A theta = rhs has no solution")
        # Orthonormal nullspace basis from the SVD of A.
        _, s, vt = np.linalg.svd(a_mat)
        tol = max(a_mat.shape) * np.finfo(float).eps * (s[0] if s.size else 0.0)
        rank = int((s > tol).sum())
        basis = vt[rank:].T  # (d, f)
        a_pinv = np.linalg.pinv(a_mat)

        # Find one feasible point; probe a few deterministic starts.
        probes = [sol, box.mean(axis=1), box[:, 0], box[:, 1]]
        origin = None
        for probe in probes:
            origin = _alternating_projection(probe, box, a_mat, a_pinv, rhs)
            if origin is not None:
                break
        if origin is None:
            raise InfeasibleRestriction("affine set does not intersect the box")
        return cls(
            eta=rhs,
            box=box,
            affine=(a_mat, rhs),
            free_dims=d - rank,
            _origin=origin,
            _basis=basis,
        )

    @classmethod
    def discrete_set(
        cls,
        points: np.ndarray,
        eta: np.ndarray | float | None = None,
    ) -> "NullRestriction":
        """Restrict to an explicit finite list of parameter points."""
        pts = np.atleast_2d(np.asarray(points, dtype=float))
        if pts.shape[0] == 0:
            raise InfeasibleRestriction("discrete restriction has no points")
        lo = pts.min(axis=0)
        hi = pts.max(axis=0)
        box = np.column_stack([lo, hi])
        if eta is None:
            eta = np.array([np.nan])
        return cls(
            eta=np.atleast_1d(np.asarray(eta, dtype=float)),
            box=box,
            discrete=pts,
            free_dims=0,
        )

    # --- geometry -----------------------------------------------------------

    def __post_init__(self):
        for attr in ("eta", "box"):
            arr = np.asarray(getattr(self, attr), dtype=float)
            arr.setflags(write=False)
            object.__setattr__(self, attr, arr)

    @property
    def d_theta(self) -> int:
        return self.box.shape[0]

    def _free_coords(self) -> list[int]:
        pinned = {c for c, _ in (self.fixed or ())}
        return [i for i in range(self.d_theta) if i not in pinned]

    def pinned_point(self) -> np.ndarray:
        """The unique feasible point when free_dims == 0 (pins only)."""
        if self.fixed is None or self.free_dims != 0:
            raise ValueError("restriction is not a single pinned point")
        theta = np.empty(self.d_theta)
        for coord, value in self.fixed:
            theta[coord] = value
        return theta

    def embed(self, z: np.ndarray) -> np.ndarray:
        """Map free coordinates back to a full parameter vector."""
        z = np.atleast_1d(np.asarray(z, dtype=float))
        if self.affine is not None:
            return self._origin + self._basis @ z
        theta = self.box[:, 0].copy()
        for coord, value in self.fixed or ():
            theta[coord] = value
        for zi, coord in zip(z, self._free_coords()):
            theta[coord] = zi
        return theta

    def extract(self, theta: np.ndarray) -> np.ndarray:
        """Inverse of embed for feasible theta."""
        theta = np.asarray(theta, dtype=float)
        if self.affine is not None:
            return self._basis.T @ (theta - self._origin)
        return theta[self._free_coords()]

    def project(self, theta: np.ndarray) -> np.ndarray | None:
        """Nearest feasible point, or None when projection fails."""
        theta = np.asarray(theta, dtype=float)
        if self.discrete is not None:
            dist = np.abs(self.discrete - theta).sum(axis=1)
            return self.discrete[int(np.argmin(dist))]
        clipped = np.clip(theta, self.box[:, 0], self.box[:, 1])
        if self.affine is None:
            return clipped
        a_mat, rhs = self.affine
        return _alternating_projection(
            clipped, self.box, a_mat, np.linalg.pinv(a_mat), rhs
        )

    def contains(self, theta: np.ndarray, tol: float = _FEAS_TOL) -> bool:
        theta = np.asarray(theta, dtype=float)
        if theta.shape != (self.d_theta,):
            return False
        if self.discrete is not None:
            return bool(np.any(np.abs(self.discrete - theta).max(axis=1) <= tol))
        inside = (theta >= self.box[:, 0] - tol).all() and (
            theta <= self.box[:, 1] + tol
        ).all()
        if not inside:
            return False
        if self.affine is not None:
            a_mat, rhs = self.affine
            return bool(np.abs(a_mat @ theta - rhs).max(initial=0.0) <= tol)
        return True

    def free_bounds(self) -> np.ndarray:
        """Search box for the free coordinates, shape (free_dims, 2)."""
        if self.affine is not None:
            span = float(np.linalg.norm(self.box[:, 1] - self.box[:, 0]))
            span = max(span, 1.0)
            return np.tile([-span, span], (self.free_dims, 1))
        free = self._free_coords()
        return self.box[free]

    def sample_starts(self, count: int, seed: int) -> np.ndarray:
        """Deterministic low-discrepancy start points in free coordinates."""
        if self.free_dims == 0:
            return np.zeros((1, 0))
        bounds = self.free_bounds()
        # Sobol points come in powers of two; draw enough and slice.
        m = max(1, math.ceil(math.log2(max(count, 2))))
        engine = qmc.Sobol(d=self.free_dims, scramble=True, seed=seed)
        unit = engine.random_base2(m)[:count]
        points = bounds[:, 0] + unit * (bounds[:, 1] - bounds[:, 0])
        if self.affine is not None:
            kept = []
            for z in points:
                proj = self.project(self.embed(z))
                if proj is not None:
                    kept.append(self.extract(proj))
            kept.append(self.extract(self._origin))
            points = np.asarray(kept)
        return points


@dataclass(frozen=True)
class OptimCfg:
    """Settings for profile_min.

    ``max_iters`` caps objective evaluations per start.  ``eps_argmin``
    widens the recorded argmin set; None resolves to 1e-6 * (1 + |value|).
    ``extra_starts`` are full parameter vectors tried before the
    low-discrepancy starts (warm starts).  ``patience`` stops the
    multistart loop once that many consecutive starts (after the first
    four) fail to improve the best value; None runs every start.
    """

    n_starts: int | None = None
    max_iters: int = 400
    tol: float = 1e-8
    eps_argmin: float | None = None
    seed: int = 0
    argmin_policy: str = "singleton"
    extra_starts: tuple = ()
    patience: int | None = 3

    def resolved_starts(self, free_dims: int) -> int:
        if self.n_starts is not None:
            return max(1, self.n_starts)
        return max(8, 8 * free_dims)


@dataclass(frozen=True)
class ProfiledFit:
    """Result of a profiled minimization."""

    value: float
    minimizer: np.ndarray
    argmin_set: tuple[np.ndarray, ...]
    evals: int
    converged: bool


_DEDUP_RESOLUTION = 1e-3


class _Recorder:
    """Tracks every evaluation; first strict improvement wins ties."""

    def __init__(self, objective: Objective, keep_all: bool):
        self.objective = objective
        self.keep_all = keep_all
        self.count = 0
        self.best_value = np.inf
        self.best_theta: np.ndarray | None = None
        self.records: list[tuple[float, np.ndarray]] = []

    def __call__(self, theta: np.ndarray) -> float:
        vec = np.asarray(self.objective(theta), dtype=float)
        value = float(
            np.max(np.nan_to_num(vec, nan=np.inf, posinf=np.inf, neginf=-np.inf))
        )
        self.count += 1
        theta = np.array(theta, dtype=float)
        if self.keep_all:
            self.records.append((value, theta))
        if value < self.best_value or self.best_theta is None:
            self.best_value = value
            self.best_theta = theta
        return value


def _argmin_set(
    rec: _Recorder, value: float, eps: float, policy: str
) -> tuple[np.ndarray, ...]:
    if policy != "all" or not rec.records:
        return (rec.best_theta,)
    seen: dict[tuple, np.ndarray] = {}
    key = tuple(np.round(rec.best_theta / _DEDUP_RESOLUTION).astype(int))
    seen[key] = rec.best_theta
    for val, theta in rec.records:
        if val <= value + eps:
            k = tuple(np.round(theta / _DEDUP_RESOLUTION).astype(int))
            seen.setdefault(k, theta)
    return tuple(seen.values())


def profile_min(
    objective: Objective,
    restriction: NullRestriction,
    cfg: OptimCfg | None = None,
) -> ProfiledFit:
    """Minimize max_j objective(theta)_j over the restricted set.

    The objective returns a vector of extended reals; its max is the
    scalar being minimized.  All-infinite objectives raise NoFiniteValue.
    """
    cfg = cfg or OptimCfg()
    rec = _Recorder(objective, keep_all=cfg.argmin_policy == "all")

    if restriction.discrete is not None:
        for point in restriction.discrete:
            rec(point)
        converged = True
    elif restriction.free_dims == 0:
        rec(restriction.pinned_point() if restriction.fixed else restriction._origin)
        converged = True
    else:
        bounds = restriction.free_bounds()
        lo, hi = bounds[:, 0], bounds[:, 1]

        # The simplex driver gets clamped values: feeding it true
        # infinities makes its convergence check form inf - inf.
        _BIG = 1e300

        def scalarized(z: np.ndarray) -> float:
            z = np.clip(z, lo, hi)
            theta = restriction.embed(z)
            if restriction.affine is not None:
                theta = restriction.project(theta)
                if theta is None:
                    return _BIG
            return min(max(rec(theta), -_BIG), _BIG)

        starts: list[np.ndarray] = []
        for theta0 in cfg.extra_starts:
            proj = restriction.project(np.asarray(theta0, dtype=float))
            if proj is not None:
                starts.append(np.clip(restriction.extract(proj), lo, hi))
        sobol = restriction.sample_starts(
            cfg.resolved_starts(restriction.free_dims), cfg.seed
        )
        starts.extend(np.clip(z, lo, hi) for z in sobol)

        converged = False
        best_seen = np.inf
        stale = 0
        for done, z0 in enumerate(starts, start=1):
            res = _sciopt.minimize(
                scalarized,
                z0,
                method="Nelder-Mead",
                options={
                    "maxfev": cfg.max_iters,
                    "xatol": cfg.tol,
                    "fatol": cfg.tol,
                },
            )
            gain = 1e-7 * (1.0 + abs(best_seen)) if math.isfinite(best_seen) else 0.0
            if rec.best_value < best_seen - gain:
                best_seen = rec.best_value
                converged = bool(res.success)
                stale = 0
            else:
                stale += 1
            if cfg.patience is not None and done >= 4 and stale >= cfg.patience:
                break

    if not math.isfinite(rec.best_value):
        if rec.best_value == np.inf:
            raise NoFiniteValue("objective was +inf at every evaluated point")
        # -inf is a legitimate extended-real minimum (degenerate moments).
    value = rec.best_value
    eps = cfg.eps_argmin if cfg.eps_argmin is not None else 1e-6 * (1.0 + abs(value))
    if not math.isfinite(eps):
        eps = 0.0
    return ProfiledFit(
        value=value,
        minimizer=rec.best_theta,
        argmin_set=_argmin_set(rec, value, eps, cfg.argmin_policy),
        evals=rec.count,
        converged=converged,
    )


def dense_grid(restriction: NullRestriction, total_points: int) -> np.ndarray:
    """Axis-aligned grid over the free box with about total_points points.

    Utility for oracle comparisons and the two-step search; grids the free
    coordinates uniformly (inclusive of endpoints) and embeds each point.
    """
    if restriction.discrete is not None:
        return restriction.discrete
    if restriction.free_dims == 0:
        return restriction.pinned_point()[None, :]
    if total_points < 1:
        raise EmptyGrid("grid must have at least one point")
    bounds = restriction.free_bounds()
    f = restriction.free_dims
    per_dim = max(2, int(round(total_points ** (1.0 / f))))
    axes = [np.linspace(lo, hi, per_dim) for lo, hi in bounds]
    mesh = np.meshgrid(*axes, indexing="ij")
    zs = np.column_stack([m.ravel() for m in mesh])
    thetas = np.array([restriction.embed(z) for z in zs])
    if restriction.affine is not None:
        kept = []
        for theta in thetas:
            proj = restriction.project(theta)
            if proj is not None:
                kept.append(proj)
        thetas = np.asarray(kept)
    return thetas
