"""Distribution of the min-max of an iid standard normal matrix.

For Z = min over N rows of the max over p columns of independent
N(0, 1) entries the distribution is closed-form:

    F(t) = 1 - (1 - Phi(t)^p)^N
    f(t) = N p (1 - Phi(t)^p)^(N-1) Phi(t)^(p-1) phi(t).

Everything is evaluated in log space so row and column counts up to about
1e6 stay finite.  The density-peak bounds hold under the growth
hypothesis p / sqrt(2 pi) > log(N p) >= 2; violating it only flags the
result, the numbers are still returned.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable

import numpy as np
from scipy import special as _sp

from .streams import substream

_LOG_SQRT_2PI = 0.5 * math.log(2.0 * math.pi)


@dataclass(frozen=True)
class MinMaxGaussianSpec:
    """Matrix shape for the min-max distribution."""

    n_rows: int
    p_cols: int

    def __post_init__(self):
        if self.n_rows < 1 or self.p_cols < 1:
            raise ValueError("matrix dimensions must be >= 1")


def _log1mexp(a: np.ndarray) -> np.ndarray:
    """log(1 - exp(a)) for a <= 0, accurate at both ends."""
    a = np.asarray(a, dtype=float)
    out = np.empty_like(a)
    small = a > -math.log(2.0)  # exp(a) near 1: use expm1
    with np.errstate(divide="ignore"):
        out[small] = np.log(-np.expm1(a[small]))
        out[~small] = np.log1p(-np.exp(a[~small]))
    return out


def minmax_cdf(spec: MinMaxGaussianSpec, t) -> np.ndarray | float:
    """Exact CDF of the min-max, vectorized over t."""
    t_arr = np.asarray(t, dtype=float)
    log_phi_p = spec.p_cols * _sp.log_ndtr(t_arr)
    with np.errstate(invalid="ignore"):
        log_surv = spec.n_rows * _log1mexp(log_phi_p)
    out = -np.expm1(log_surv)
    out = np.where(log_phi_p == 0.0, 1.0, out)  # t = +inf
    if np.ndim(t) == 0:
        return float(out)
    return out


def minmax_density(spec: MinMaxGaussianSpec, t) -> np.ndarray | float:
    """Exact density of the min-max, vectorized over t."""
    t_arr = np.asarray(t, dtype=float)
    n_rows, p_cols = spec.n_rows, spec.p_cols
    log_phi = _sp.log_ndtr(t_arr)
    log_pdf = -0.5 * t_arr * t_arr - _LOG_SQRT_2PI
    log_f = math.log(n_rows) + math.log(p_cols) + log_pdf
    if p_cols > 1:
        log_f = log_f + (p_cols - 1) * log_phi
    if n_rows > 1:
        with np.errstate(invalid="ignore"):
            log_f = log_f + (n_rows - 1) * _log1mexp(p_cols * log_phi)
    with np.errstate(over="ignore"):
        out = np.exp(log_f)
    out = np.where(np.isfinite(t_arr), out, 0.0)
    out = np.where(np.isnan(t_arr), np.nan, out)
    if np.ndim(t) == 0:
        return float(out)
    return out


@dataclass(frozen=True)
class DensityBounds:
    """Envelope for the density peak, with the growth-hypothesis flag."""

    upper: float
    lower: float
    hypothesis_ok: bool


def density_bounds(spec: MinMaxGaussianSpec) -> DensityBounds:
    """Upper and lower bounds on max_t f(t).

    The upper bound is 2 (sqrt(2) + 2) log^{3/2}(N p); the lower bound is
    (sqrt(2) log^{1/2}(p / (sqrt(2 pi) log N)) - 2) log(N) / e, clamped at
    zero and degenerating to zero for a single row.
    """
    n_rows, p_cols = spec.n_rows, spec.p_cols
    log_np = math.log(n_rows) + math.log(p_cols)
    hypothesis_ok = (p_cols / math.sqrt(2.0 * math.pi) > log_np) and (log_np >= 2.0)
    upper = 2.0 * (math.sqrt(2.0) + 2.0) * log_np ** 1.5
    if n_rows == 1:
        lower = 0.0
    else:
        arg = p_cols / (math.sqrt(2.0 * math.pi) * math.log(n_rows))
        if arg <= 1.0:
            lower = 0.0
        else:
            lower = max(
                0.0,
                (math.sqrt(2.0) * math.sqrt(math.log(arg)) - 2.0)
                * math.log(n_rows)
                / math.e,
            )
    return DensityBounds(upper=upper, lower=lower, hypothesis_ok=hypothesis_ok)


@dataclass(frozen=True)
class McDensity:
    """Monte Carlo draws of the min-max plus a kernel density on a grid."""

    grid: np.ndarray
    density: np.ndarray
    draws: np.ndarray
    bandwidth: float


def iid_normal_sampler(
    spec: MinMaxGaussianSpec,
) -> Callable[[np.random.Generator, int], np.ndarray]:
    """Sampler producing (size, N, p) iid standard normal blocks."""

    def sampler(rng: np.random.Generator, size: int) -> np.ndarray:
        return rng.standard_normal((size, spec.n_rows, spec.p_cols))

    return sampler


def mc_minmax_density(
    sampler: Callable[[np.random.Generator, int], np.ndarray],
    draws: int,
    bandwidth: float | None = None,
    grid: np.ndarray | None = None,
    seed: int = 0,
    chunk: int = 20000,
) -> McDensity:
    """Simulate min-max draws and smooth them with a Gaussian kernel.

    ``sampler(rng, size)`` returns a (size, N, p) block; rows are reduced
    by max over columns then min over rows.  The bandwidth defaults to
    Silverman's rule.  Memory stays bounded by drawing in chunks.
    """
    if draws < 2:
        raise ValueError("need at least two draws")
    rng = substream(seed, 7)
    z = np.empty(draws)
    done = 0
    while done < draws:
        size = min(chunk, draws - done)
        block = sampler(rng, size)
        z[done : done + size] = block.max(axis=2).min(axis=1)
        done += size

    if bandwidth is None:
        sd = float(np.std(z))
        iqr = float(np.subtract(*np.percentile(z, [75, 25])))
        scale = min(sd, iqr / 1.34) if iqr > 0 else sd
        bandwidth = 0.9 * max(scale, 1e-12) * draws ** (-0.2)
    if grid is None:
        pad = 3.0 * bandwidth
        grid = np.linspace(z.min() - pad, z.max() + pad, 256)
    grid = np.asarray(grid, dtype=float)

    density = np.zeros(grid.size)
    norm = 1.0 / (draws * bandwidth * math.sqrt(2.0 * math.pi))
    for start in range(0, draws, chunk):
        part = z[start : start + chunk]
        u = (grid[:, None] - part[None, :]) / bandwidth
        density += np.exp(-0.5 * u * u).sum(axis=1)
    density *= norm
    return McDensity(grid=grid, density=density, draws=z, bandwidth=bandwidth)
