"""Static log-log figures for sweep reports.

Figures are drawn on a bare Figure with the SVG backend, so no global pyplot
state is touched and the output depends only on the report. Text is kept as
SVG text, element ids come from a fixed salt and the date stamp is dropped,
which makes the file byte-identical across runs.
"""

from __future__ import annotations

import math

import matplotlib
import numpy as np
from matplotlib.backends.backend_svg import FigureCanvasSVG
from matplotlib.figure import Figure

from .errors import DomainError

__all__ = ["emit_svg", "loglog_figure"]

_RC = {
    "svg.fonttype": "none",
    "svg.hashsalt": "gpmisspec",
    "font.size": 10,
    "axes.grid": True,
    "grid.alpha": 0.3,
}


def loglog_figure(sizes, values, slope, intercept, theoretical_slope=None, ylabel="value", title=""):
    """Scatter of (size, value) on log-log axes with fitted and reference lines."""
    n = np.asarray(sizes, dtype=float)
    v = np.asarray(values, dtype=float)
    ok = np.isfinite(v) & (v > 0)
    if ok.sum() < 3:
        raise DomainError("a log-log figure needs at least three positive points")
    fig = Figure(figsize=(5.0, 3.6))
    FigureCanvasSVG(fig)
    ax = fig.add_subplot(1, 1, 1)
    ax.set_xscale("log")
    ax.set_yscale("log")
    ax.plot(n[ok], v[ok], "o", color="k", ms=5, label="computed")
    span = np.geomspace(n[ok].min(), n[ok].max(), 64)
    ax.plot(span, np.exp(intercept) * span**slope, "-", color="C0", label=f"fit slope {slope:.2f}")
    if theoretical_slope is not None and math.isfinite(theoretical_slope):
        # reference line through the geometric centre of the points
        x0 = math.exp(float(np.mean(np.log(n[ok]))))
        y0 = math.exp(float(np.mean(np.log(v[ok]))))
        ax.plot(span, y0 * (span / x0) ** theoretical_slope, "--", color="C3",
                label=f"theory slope {theoretical_slope:.2f}")
    ax.set_xlabel("N")
    ax.set_ylabel(ylabel)
    if title:
        ax.set_title(title, fontsize=9)
    ax.legend(loc="best", frameon=False)
    fig.tight_layout()
    return fig


def emit_svg(report, path, ylabel=None):
    """Write the log-log figure of a rate or variance-decay report as SVG."""
    sizes = list(report.sizes)
    if len(sizes) < 3:
        raise DomainError("a report needs at least three points to plot")
    title = getattr(report, "banner", "") or ""
    if ylabel is None:
        ylabel = "E[scale MLE]" if hasattr(report, "scenario") else "max variance"
    with matplotlib.rc_context(_RC):
        fig = loglog_figure(sizes, report.values, report.slope, report.intercept,
                            report.theoretical_slope, ylabel=ylabel, title=title)
        fig.savefig(path, format="svg", metadata={"Date": None})
