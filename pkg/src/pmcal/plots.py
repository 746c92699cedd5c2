"""Figure rendering for run reports.

Figures are written as PNG next to the plot-data CSVs with fixed metadata so
repeated runs stay byte identical.  Histogram bins follow the report
conventions: 1 % for relative residuals, 1 ug/m^3 for residuals.
"""

from __future__ import annotations

import math
from pathlib import Path

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt
import numpy as np

PNG_METADATA = {"Software": "pmcal"}
DPI = 120


def _save(fig, path: Path) -> None:
    fig.savefig(path, dpi=DPI, metadata=PNG_METADATA)
    plt.close(fig)


def histogram_edges(values: np.ndarray, width: float) -> np.ndarray:
    """Integer-aligned bin edges of the given width covering the data."""
    if values.size == 0:
        return np.array([0.0, width])
    low = math.floor(values.min() / width) * width
    high = math.ceil(values.max() / width) * width
    if high <= low:
        high = low + width
    n = int(round((high - low) / width))
    return low + width * np.arange(n + 1)


def scatter_fit_figure(
    path: Path,
    x: np.ndarray,
    y: np.ndarray,
    rh: np.ndarray | None,
    title: str,
    fit_line: tuple[np.ndarray, np.ndarray] | None = None,
    bounds: tuple[np.ndarray, np.ndarray, np.ndarray] | None = None,
) -> None:
    """Candidate vs reference scatter, RH colored, with optional fit and bounds."""
    fig, ax = plt.subplots(figsize=(5.0, 4.2))
    if rh is not None and rh.size:
        points = ax.scatter(x, y, c=rh, s=4, cmap="viridis", vmin=0, vmax=100)
        fig.colorbar(points, ax=ax, label="RH (%)")
    else:
        ax.scatter(x, y, s=4, color="tab:blue")
    limit = max(float(np.max(x, initial=1.0)), float(np.max(y, initial=1.0)))
    ax.plot([0, limit], [0, limit], ls="--", lw=0.8, color="gray", label="identity")
    if fit_line is not None:
        ax.plot(*fit_line, color="red", lw=1.2, label="fit")
    if bounds is not None:
        grid, lower, upper = bounds
        ax.plot(grid, lower, color="red", lw=0.8, ls="-.", label="95% bounds")
        ax.plot(grid, upper, color="red", lw=0.8, ls="-.")
    ax.set_xlabel("candidate (ug/m3)")
    ax.set_ylabel("reference (ug/m3)")
    ax.set_title(title)
    ax.legend(loc="upper left", fontsize=8)
    fig.tight_layout()
    _save(fig, path)


def residual_panel_figure(
    path: Path,
    rh: np.ndarray,
    residuals: np.ndarray,
    reference: np.ndarray,
    rel_rh: np.ndarray,
    rel_residuals: np.ndarray,
    rel_reference: np.ndarray,
    title: str,
) -> None:
    """Four-panel residual view: RH scatters plus fixed-width histograms.

    The relative-residual arrays cover only the floor-valid pairs, so they
    arrive separately from the full residual arrays.
    """
    fig, axes = plt.subplots(2, 2, figsize=(9.0, 7.0))

    ax = axes[0][0]
    if rel_residuals.size:
        points = ax.scatter(rel_rh, rel_residuals, c=rel_reference, s=4, cmap="plasma")
        fig.colorbar(points, ax=ax, label="reference (ug/m3)")
    ax.axhline(0.0, color="gray", lw=0.8)
    ax.set_xlabel("RH (%)")
    ax.set_ylabel("relative residual (%)")

    ax = axes[0][1]
    edges = histogram_edges(rel_residuals, 1.0)
    ax.hist(rel_residuals, bins=edges, color="tab:blue")
    ax.set_xlabel("relative residual (%), 1% bins")
    ax.set_ylabel("count")

    ax = axes[1][0]
    points = ax.scatter(rh, residuals, c=reference, s=4, cmap="plasma")
    fig.colorbar(points, ax=ax, label="reference (ug/m3)")
    ax.axhline(0.0, color="gray", lw=0.8)
    ax.set_xlabel("RH (%)")
    ax.set_ylabel("residual (ug/m3)")

    ax = axes[1][1]
    edges = histogram_edges(residuals, 1.0)
    ax.hist(residuals, bins=edges, color="tab:blue")
    ax.set_xlabel("residual (ug/m3), 1 ug/m3 bins")
    ax.set_ylabel("count")

    fig.suptitle(title)
    fig.tight_layout()
    _save(fig, path)
