"""Figures and gnuplot-style data files for curves and bound reports.

matplotlib is driven through the Agg backend so nothing needs a display.
"""

from __future__ import annotations

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402
import numpy as np  # noqa: E402

from .bench import BoundReport, ConvergenceCurve  # noqa: E402


def write_curve_dat(curve: ConvergenceCurve, path):
    """Whitespace-separated columns with a commented header."""
    with open(path, "w") as fh:
        fh.write(f"# {curve.label}\n# size tv err slack seconds\n")
        for r in curve.rows:
            fh.write(f"{r.size} {r.tv:.12g} {r.err:.6g} {r.slack:.6g} {r.seconds:.3f}\n")


def write_report_dat(report: BoundReport, path):
    with open(path, "w") as fh:
        fh.write(f"# {report.model}\n# index value term\n")
        for i, t in enumerate(report.thm32_terms + report.thm12_terms + report.corollary_terms):
            fh.write(f"{i} {t.value:.12g} \"{t.name}\"\n")


def plot_curve(curve: ConvergenceCurve, path, reference_slope: float = -0.5):
    """Log-log TV against size with error bars and a reference slope."""
    x = curve.sizes.astype(float)
    y = curve.tv
    err = np.array([r.err for r in curve.rows])
    fig, ax = plt.subplots(figsize=(5, 3.5))
    ax.errorbar(x, y, yerr=err, marker="o", ms=4, lw=1.2, capsize=2, label="d_TV")
    pos = y > 0
    if pos.any() and len(x) > 1:
        x0, y0 = x[pos][0], y[pos][0]
        ax.plot(x, y0 * (x / x0) ** reference_slope, "k--", lw=0.8,
                label=f"slope {reference_slope:g}")
        ax.set_xscale("log")
        ax.set_yscale("log")
    ax.set_xlabel("size")
    ax.set_ylabel("total variation")
    ax.set_title(curve.label, fontsize=9)
    ax.legend(fontsize=8, frameon=False)
    fig.tight_layout()
    fig.savefig(path, dpi=120)
    plt.close(fig)


def plot_bound_report(report: BoundReport, path):
    """Horizontal bars of every bracket term on a log axis."""
    terms = report.thm32_terms + report.thm12_terms + report.corollary_terms
    groups = (["full"] * len(report.thm32_terms) + ["short"] * len(report.thm12_terms)
              + ["rate"] * len(report.corollary_terms))
    colours = {"full": "#4477aa", "short": "#cc6677", "rate": "#999933"}
    vals = np.array([t.value for t in terms])
    floor = max(vals[vals > 0].min() * 0.1, 1e-300) if np.any(vals > 0) else 1e-16
    fig, ax = plt.subplots(figsize=(6, 0.35 * len(terms) + 1.2))
    ypos = np.arange(len(terms))
    ax.barh(ypos, np.maximum(vals, floor), color=[colours[g] for g in groups])
    ax.set_yticks(ypos)
    ax.set_yticklabels([t.name for t in terms], fontsize=7)
    ax.invert_yaxis()
    ax.set_xscale("log")
    ax.set_xlabel("term value")
    ax.set_title(report.model, fontsize=9)
    fig.tight_layout()
    fig.savefig(path, dpi=120)
    plt.close(fig)
