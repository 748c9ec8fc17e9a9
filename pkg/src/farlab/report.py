"""Delimited data and figure emission for verification reports.

Every suite writes plot-ready CSVs (full-precision floats, LF line endings)
and renders the matching matplotlib figures next to them.  All output is
deterministic for a fixed input, figures included.
"""

from __future__ import annotations

import math
from pathlib import Path

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt
import numpy as np
from scipy.stats import norm

from .lab import (
    ConsistencyReport,
    EigenLemmaReport,
    McReport,
    MdaReport,
    RaReport,
    Th1Report,
    VARIANCE_RATIO_BAND,
)

FIG_DPI = 120
# Fixed metadata keeps PNG output byte-stable across environments.
PNG_METADATA = {"Software": "farlab"}


def write_csv(path: Path, header, rows) -> Path:
    """Comma-separated values, repr-precision floats, LF endings."""
    path = Path(path)
    with open(path, "w", newline="\n") as fh:
        fh.write(",".join(str(h) for h in header) + "\n")
        for row in rows:
            fh.write(",".join(_cell(v) for v in row) + "\n")
    return path


def _cell(v) -> str:
    if isinstance(v, float):
        return repr(v)
    if isinstance(v, (np.floating,)):
        return repr(float(v))
    return str(v)


def save_figure(fig, path: Path) -> Path:
    path = Path(path)
    fig.savefig(path, dpi=FIG_DPI, metadata=PNG_METADATA)
    plt.close(fig)
    return path


def histogram_data(samples: np.ndarray, bins: int = 40):
    counts, edges = np.histogram(samples, bins=bins)
    return edges, counts


def qq_data(samples: np.ndarray, sigma: float):
    x = np.sort(samples)
    n = x.size
    theo = norm.ppf((np.arange(1, n + 1) - 0.5) / n) * sigma
    return theo, x


def emit_th2(report: McReport, out_dir: Path, stem: str = "th2") -> list:
    """Per-direction samples, histogram bins, QQ pairs, and ratio summary."""
    out = Path(out_dir)
    files = []
    labels = [f"e{d.index + 1}" for d in report.directions]

    files.append(write_csv(
        out / f"{stem}_samples.csv", ["rep"] + labels,
        ([i + 1] + [float(v) for v in row] for i, row in enumerate(report.samples))))

    files.append(write_csv(
        out / f"{stem}_directions.csv",
        ["direction", "target_variance", "sample_variance", "ratio",
         "ks_stat", "ks_p", "kurtosis", "coverage"],
        ([labels[j], d.target_variance, d.sample_variance, d.ratio,
          d.ks_stat, d.ks_p, d.kurtosis, d.coverage]
         for j, d in enumerate(report.directions))))

    for j, d in enumerate(report.directions):
        s = report.samples[:, j]
        sigma = math.sqrt(d.sample_variance)
        edges, counts = histogram_data(s)
        files.append(write_csv(
            out / f"{stem}_hist_{labels[j]}.csv", ["bin_left", "bin_right", "count"],
            ([edges[i], edges[i + 1], int(counts[i])] for i in range(counts.size))))
        theo, emp = qq_data(s, sigma)
        files.append(write_csv(
            out / f"{stem}_qq_{labels[j]}.csv", ["theoretical", "empirical"],
            zip(theo, emp)))

        fig, (ax1, ax2) = plt.subplots(1, 2, figsize=(9, 3.6))
        ax1.hist(s, bins=40, density=True, alpha=0.7, color="steelblue")
        grid = np.linspace(s.min(), s.max(), 200)
        ax1.plot(grid, norm.pdf(grid, 0.0, sigma), "k-", lw=1.2)
        ax1.set_title(f"projected statistic along {labels[j]}")
        ax1.set_xlabel("value")
        ax2.plot(theo, emp, ".", ms=2.5, color="steelblue")
        lim = [min(theo.min(), emp.min()), max(theo.max(), emp.max())]
        ax2.plot(lim, lim, "k-", lw=0.8)
        ax2.set_title(f"QQ vs fitted normal (p={d.ks_p:.3f})")
        ax2.set_xlabel("theoretical quantile")
        ax2.set_ylabel("empirical quantile")
        fig.tight_layout()
        files.append(save_figure(fig, out / f"{stem}_dist_{labels[j]}.png"))

    fig, ax = plt.subplots(figsize=(5, 3.4))
    ratios = [d.ratio for d in report.directions]
    ax.bar(labels, ratios, color="steelblue", alpha=0.8)
    for y, style in zip(VARIANCE_RATIO_BAND, ("--", "--")):
        ax.axhline(y, color="crimson", ls=style, lw=1.0)
    ax.axhline(1.0, color="k", lw=0.8)
    ax.set_ylabel("variance ratio")
    ax.set_title(f"variance ratios (n={report.n}, k={report.k_n}, "
                 f"{report.normalization})")
    fig.tight_layout()
    files.append(save_figure(fig, out / f"{stem}_ratios.png"))
    return files


def emit_th1(report: Th1Report, out_dir: Path, stem: str = "th1") -> list:
    out = Path(out_dir)
    files = [write_csv(
        out / f"{stem}_variance.csv", ["k", "divergent", "convergent"],
        zip(report.k_list, report.divergent, report.convergent))]
    fig, ax = plt.subplots(figsize=(5, 3.4))
    ax.plot(report.k_list, report.divergent, "o-", label="squared coords = eigenvalues")
    ax.plot(report.k_list, report.convergent, "s--", label="single-coordinate direction")
    ax.set_xlabel("cutoff k")
    ax.set_ylabel("variance")
    ax.set_title("projected variance vs cutoff")
    ax.legend(fontsize=8)
    fig.tight_layout()
    files.append(save_figure(fig, out / f"{stem}_variance.png"))
    return files


def emit_eigen_lemmas(report: EigenLemmaReport, out_dir: Path, stem: str = "eigen") -> list:
    out = Path(out_dir)
    files = [write_csv(
        out / f"{stem}_separation.csv", ["j", "ratio"],
        zip(report.separation_j, report.separation_ratio))]
    fig, ax = plt.subplots(figsize=(5, 3.4))
    ax.plot(report.separation_j, report.separation_ratio, ".-", color="steelblue")
    ax.axhline(report.separation_median, color="k", lw=0.8, ls=":")
    ax.set_xlabel("j")
    ax.set_ylabel("normalized resolvent sum")
    ax.set_title(f"eigenvalue separation ratio (threshold j0={report.threshold_index})")
    fig.tight_layout()
    files.append(save_figure(fig, out / f"{stem}_separation.png"))
    return files


def emit_ra(report: RaReport, out_dir: Path, stem: str = "ra") -> list:
    out = Path(out_dir)
    files = [write_csv(
        out / f"{stem}_ratios.csv",
        ["p", "m", "n", "gamma_mean", "gamma_se", "s_mean", "s_se"],
        ([c.p, c.m, c.n, c.gamma_mean, c.gamma_se, c.s_mean, c.s_se]
         for c in report.cells))]
    fig, ax = plt.subplots(figsize=(5.5, 3.6))
    for p in range(1, report.p_max + 1):
        for m in range(1, report.p_max + 1):
            series = [report.cell(p, m, n) for n in report.n_list]
            ax.plot(report.n_list, [c.gamma_mean for c in series],
                    "-", color="steelblue", alpha=0.35, lw=0.8)
            ax.plot(report.n_list, [c.s_mean for c in series],
                    "-", color="darkorange", alpha=0.35, lw=0.8)
    ax.axhline(1.0, color="k", lw=0.8, ls=":")
    ax.set_xscale("log")
    ax.set_xlabel("n")
    ax.set_ylabel("normalized second moment")
    ax.set_title("covariance (blue) and score (orange) moment ratios")
    fig.tight_layout()
    files.append(save_figure(fig, out / f"{stem}_ratios.png"))
    return files


def emit_mda(report: MdaReport, out_dir: Path, stem: str = "mda") -> list:
    out = Path(out_dir)
    rows = []
    for e in report.entries:
        d = e.mc_mean.shape[0]
        for i in range(d):
            for j in range(d):
                rows.append([e.time_index, i + 1, j + 1, e.closed_form[i, j],
                             e.mc_mean[i, j], e.mc_se[i, j]])
    files = [write_csv(
        out / f"{stem}_entries.csv",
        ["time_index", "row", "col", "closed_form", "mc_mean", "mc_se"], rows)]
    fig, axes = plt.subplots(1, len(report.entries), figsize=(3.2 * len(report.entries), 3.2))
    if len(report.entries) == 1:
        axes = [axes]
    for ax, e in zip(axes, report.entries):
        sig = np.abs(e.mc_mean - e.closed_form) / np.maximum(e.mc_se, 1e-300)
        im = ax.imshow(sig, vmin=0, vmax=4, cmap="viridis")
        ax.set_title(f"k={e.time_index}: max {e.max_sigmas:.2f} se")
        fig.colorbar(im, ax=ax, shrink=0.8)
    fig.suptitle(f"array covariance deviation (n={report.n}, cutoff={report.cutoff}, "
                 f"accumulated ratio {report.accumulated_ratio:.3f})", fontsize=9)
    fig.tight_layout()
    files.append(save_figure(fig, out / f"{stem}_deviation.png"))
    return files


def emit_consistency(report: ConsistencyReport, out_dir: Path, stem: str = "consistency") -> list:
    out = Path(out_dir)
    files = [write_csv(
        out / f"{stem}_medians.csv", ["n", "median_error"],
        zip(report.n_list, report.medians))]
    fig, ax = plt.subplots(figsize=(5, 3.4))
    ax.loglog(report.n_list, report.medians, "o-", color="steelblue")
    ax.set_xlabel("n")
    ax.set_ylabel("median sup-norm error")
    ax.set_title("projected estimator error vs sample size")
    fig.tight_layout()
    files.append(save_figure(fig, out / f"{stem}_trend.png"))
    return files


def emit_cov_identity(rows, out_dir: Path, stem: str = "cov_identity") -> list:
    """rows: iterable of (label, residual)."""
    out = Path(out_dir)
    rows = list(rows)
    files = [write_csv(out / f"{stem}.csv", ["model", "residual"], rows)]
    fig, ax = plt.subplots(figsize=(6, 3.4))
    labels = [r[0] for r in rows]
    values = [max(r[1], 1e-18) for r in rows]
    ax.bar(range(len(rows)), values, color="steelblue")
    ax.set_yscale("log")
    ax.set_xticks(range(len(rows)))
    ax.set_xticklabels(labels, rotation=90, fontsize=6)
    ax.axhline(1e-10, color="crimson", ls="--", lw=1.0)
    ax.set_ylabel("identity residual")
    ax.set_title("stationarity identity residuals")
    fig.tight_layout()
    files.append(save_figure(fig, out / f"{stem}.png"))
    return files
