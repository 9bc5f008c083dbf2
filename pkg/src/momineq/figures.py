"""Matplotlib renderings of the CSV outputs.

Each function draws one figure and writes it to the given path.  These
are companions to the delimited files, not a replacement: every number
shown here is also in a CSV.  matplotlib loads lazily so library users
who never plot pay nothing for it.
"""

from __future__ import annotations

import numpy as np


def _plt():
    import matplotlib

    matplotlib.use("Agg")
    import matplotlib.pyplot as plt

    return plt


def stud_figure(stud: np.ndarray, margin: float, t_n: float, c: float, path: str) -> str:
    """Studentized moments at the profiled minimizer.

    Shows which inequalities drive the statistic: the selection band
    [max - margin, max] is shaded, and the critical value drawn for
    scale.
    """
    plt = _plt()
    stud = np.asarray(stud, dtype=float)
    fig, ax = plt.subplots(figsize=(6.4, 4.0))
    idx = np.arange(1, stud.size + 1)
    ax.bar(idx, stud, color="#4878a8", width=0.7)
    top = np.max(stud)
    if np.isfinite(top) and np.isfinite(margin):
        ax.axhspan(top - margin, top, color="#e8c468", alpha=0.35, label="selection band")
    ax.axhline(c, color="#a84848", linestyle="--", label=f"critical value {c:.3g}")
    ax.axhline(0.0, color="black", linewidth=0.8)
    ax.set_xlabel("moment index")
    ax.set_ylabel("studentized moment")
    ax.set_title(f"profiled statistic {t_n:.4g}")
    ax.legend(loc="best", fontsize=8)
    fig.tight_layout()
    fig.savefig(path, dpi=120)
    plt.close(fig)
    return path


def cs_figure(
    eta: np.ndarray,
    statistics: np.ndarray,
    criticals: np.ndarray,
    accepted: np.ndarray,
    alpha: float,
    path: str,
) -> str:
    """Test statistic and critical value along the null grid."""
    plt = _plt()
    fig, ax = plt.subplots(figsize=(6.4, 4.0))
    finite = np.isfinite(statistics)
    ax.plot(eta[finite], statistics[finite], color="#4878a8", label="statistic")
    ax.plot(eta, criticals, color="#a84848", linestyle="--", label="critical value")
    acc = np.asarray(accepted, dtype=bool)
    if acc.any():
        lo, hi = eta[acc].min(), eta[acc].max()
        ax.axvspan(lo, hi, color="#78a878", alpha=0.25, label="accepted")
    ax.set_xlabel("null value")
    ax.set_ylabel("value")
    ax.set_title(f"confidence set, level {1 - alpha:.2g}")
    ax.legend(loc="best", fontsize=8)
    fig.tight_layout()
    fig.savefig(path, dpi=120)
    plt.close(fig)
    return path


def simulate_figure(
    statistics: np.ndarray, criticals: np.ndarray, rate: float, path: str
) -> str:
    """Histogram of replicate statistics against the critical values."""
    plt = _plt()
    stats = np.asarray(statistics, dtype=float)
    stats = stats[np.isfinite(stats)]
    fig, ax = plt.subplots(figsize=(6.4, 4.0))
    ax.hist(stats, bins=40, color="#4878a8", alpha=0.8, density=True)
    med_c = float(np.median(criticals))
    ax.axvline(med_c, color="#a84848", linestyle="--", label=f"median critical {med_c:.3g}")
    ax.set_xlabel("statistic")
    ax.set_ylabel("density")
    ax.set_title(f"rejection rate {rate:.4g}")
    ax.legend(loc="best", fontsize=8)
    fig.tight_layout()
    fig.savefig(path, dpi=120)
    plt.close(fig)
    return path


def kappa_figure(
    grid: np.ndarray,
    c_grid: np.ndarray,
    ac_grid: np.ndarray,
    kappa_n: float,
    path: str,
) -> str:
    """Critical value and anti-concentration along the kappa grid."""
    plt = _plt()
    fig, ax = plt.subplots(figsize=(6.4, 4.0))
    ax.plot(grid, c_grid, color="#4878a8", marker="o", markersize=3, label="critical value")
    ax.set_xscale("log")
    ax.set_xlabel("kappa")
    ax.set_ylabel("critical value")
    ax2 = ax.twinx()
    ax2.plot(grid, ac_grid, color="#78a878", marker="s", markersize=3, label="anti-concentration")
    ax2.set_ylabel("anti-concentration")
    if np.isfinite(kappa_n):
        ax.axvline(kappa_n, color="#a84848", linestyle="--", label=f"selected {kappa_n:.3g}")
    lines, labels = ax.get_legend_handles_labels()
    lines2, labels2 = ax2.get_legend_handles_labels()
    ax.legend(lines + lines2, labels + labels2, loc="best", fontsize=8)
    fig.tight_layout()
    fig.savefig(path, dpi=120)
    plt.close(fig)
    return path


def density_figure(
    grid: np.ndarray,
    density: np.ndarray,
    cdf: np.ndarray,
    upper: float,
    lower: float,
    path: str,
    mc_grid: np.ndarray | None = None,
    mc_density: np.ndarray | None = None,
) -> str:
    """Min-max density and CDF with the peak bounds marked."""
    plt = _plt()
    fig, ax = plt.subplots(figsize=(6.4, 4.0))
    ax.plot(grid, density, color="#4878a8", label="density")
    if mc_grid is not None and mc_density is not None:
        ax.plot(mc_grid, mc_density, color="#888888", linestyle=":", label="MC estimate")
    if np.isfinite(upper):
        ax.axhline(upper, color="#a84848", linestyle="--", linewidth=0.9, label="peak bounds")
    if np.isfinite(lower) and lower > 0:
        ax.axhline(lower, color="#a84848", linestyle=":", linewidth=0.9)
    ax.set_xlabel("t")
    ax.set_ylabel("density")
    ax2 = ax.twinx()
    ax2.plot(grid, cdf, color="#78a878", linewidth=0.9, label="CDF")
    ax2.set_ylabel("CDF")
    ax2.set_ylim(-0.02, 1.02)
    lines, labels = ax.get_legend_handles_labels()
    lines2, labels2 = ax2.get_legend_handles_labels()
    ax.legend(lines + lines2, labels + labels2, loc="best", fontsize=8)
    fig.tight_layout()
    fig.savefig(path, dpi=120)
    plt.close(fig)
    return path
