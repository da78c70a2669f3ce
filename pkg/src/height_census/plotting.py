"""Figures for census reports: log count against log log X with the predicted line."""
from __future__ import annotations

import math
from pathlib import Path
from typing import Sequence

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402

STYLE = {
    "font.size": 10.0,
    "axes.linewidth": 0.8,
    "axes.labelsize": "medium",
    "lines.linewidth": 1.2,
    "lines.markersize": 5,
    "xtick.direction": "in",
    "ytick.direction": "in",
    "xtick.top": True,
    "ytick.right": True,
    "legend.fontsize": "small",
    "legend.frameon": False,
    "savefig.bbox": "tight",
    "savefig.dpi": 150,
}


def figure_size(scale: float = 1.0) -> tuple[float, float]:
    golden = (math.sqrt(5.0) - 1.0) / 2.0
    width = 5.5 * scale
    return width, width * golden


def plot_points(xs: Sequence[float], counts: Sequence[int]) -> list[tuple[float, float]]:
    """``(log log X, log count)`` pairs; rungs with ``X <= e`` or a zero count are skipped."""
    out = []
    for x, n in zip(xs, counts):
        if x > math.e and n > 0:
            out.append((math.log(math.log(x)), math.log(n)))
    return out


def render_census_figure(
    xs: Sequence[float],
    counts: Sequence[int],
    constant: float | None,
    exponent: int,
    path: Path,
    title: str = "",
) -> Path | None:
    pts = plot_points(xs, counts)
    if not pts:
        return None
    with plt.rc_context(STYLE):
        fig, ax = plt.subplots(figsize=figure_size())
        ax.plot([p[0] for p in pts], [p[1] for p in pts], "o", label="exact count")
        if constant:
            lo, hi = pts[0][0], pts[-1][0]
            grid = [lo + (hi - lo) * t / 50 for t in range(51)]
            ax.plot(grid, [math.log(constant) + exponent * g for g in grid], "-", label=f"c (log X)^{exponent}")
        ax.set_xlabel("log log X")
        ax.set_ylabel("log count")
        if title:
            ax.set_title(title)
        ax.legend()
        fig.savefig(path, metadata={"Software": None})
        plt.close(fig)
    return path
