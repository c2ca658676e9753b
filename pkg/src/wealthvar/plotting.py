"""Minimal SVG charts: a median line with a shaded band per panel.

Output is deterministic: a fixed hash salt and no date metadata.
"""

from __future__ import annotations

from pathlib import Path
from typing import Sequence

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402
import numpy as np  # noqa: E402

matplotlib.rcParams["svg.hashsalt"] = "wealthvar"
matplotlib.rcParams["svg.fonttype"] = "none"

_META = {"Date": None, "Creator": "wealthvar"}


def _grid(n: int) -> tuple[int, int]:
    cols = min(n, 3)
    return (n + cols - 1) // cols, cols


def band_panels(path, x, panels: Sequence[tuple[str, np.ndarray, np.ndarray, np.ndarray]],
                title: str = "", extra: Sequence[tuple[str, np.ndarray]] | None = None,
                xlabel: str = "horizon") -> Path:
    """One panel per ``(label, median, lo, hi)``; ``extra`` adds one reference line per panel."""
    rows, cols = _grid(len(panels))
    fig, axes = plt.subplots(rows, cols, figsize=(3.2 * cols, 2.4 * rows), squeeze=False)
    x = np.asarray(x)
    for i, (label, med, lo, hi) in enumerate(panels):
        ax = axes[i // cols][i % cols]
        ax.fill_between(x, lo, hi, color="0.8", linewidth=0)
        ax.plot(x, med, color="k", linewidth=1.2)
        if extra is not None:
            ax.plot(x, extra[i][1], color="tab:red", linewidth=1.0, linestyle="--", label=extra[i][0])
        ax.axhline(0.0, color="0.5", linewidth=0.5)
        ax.set_title(label, fontsize=9)
        ax.tick_params(labelsize=7)
        if i // cols == rows - 1:
            ax.set_xlabel(xlabel, fontsize=8)
    for j in range(len(panels), rows * cols):
        axes[j // cols][j % cols].axis("off")
    if title:
        fig.suptitle(title, fontsize=10)
    fig.tight_layout()
    path = Path(path)
    fig.savefig(path, format="svg", metadata=_META)
    plt.close(fig)
    return path


def line_chart(path, x, series: dict[str, np.ndarray], title: str = "", xlabel: str = "") -> Path:
    fig, ax = plt.subplots(figsize=(6.4, 3.2))
    xs = np.arange(len(x))
    for name, y in series.items():
        ax.plot(xs, y, linewidth=1.0, label=name)
    step = max(len(x) // 8, 1)
    ax.set_xticks(xs[::step])
    ax.set_xticklabels([str(v) for v in list(x)[::step]], fontsize=7, rotation=30)
    ax.legend(fontsize=7)
    ax.set_title(title, fontsize=10)
    ax.set_xlabel(xlabel, fontsize=8)
    fig.tight_layout()
    path = Path(path)
    fig.savefig(path, format="svg", metadata=_META)
    plt.close(fig)
    return path
