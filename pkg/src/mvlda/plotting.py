"""Static figures written to SVG.

Figures are built on bare ``Figure`` objects (no pyplot state) and saved
with a fixed hash salt and no date metadata, so identical inputs produce
byte-identical files.
"""

from __future__ import annotations

from pathlib import Path

import matplotlib

matplotlib.use("Agg")

import numpy as np  # noqa: E402
from matplotlib.figure import Figure  # noqa: E402

SVG_RC = {
    "svg.hashsalt": "mvlda",
    "svg.fonttype": "none",
    "font.size": 9,
    "axes.spines.top": False,
    "axes.spines.right": False,
    "axes.grid": True,
    "grid.alpha": 0.3,
}
CLASS_COLORS = {1: "#c0392b", 2: "#2c7fb8"}
CLASS_NAMES = {1: "class 1", 2: "class 2"}


def _save(fig: Figure, path) -> Path:
    path = Path(path)
    with matplotlib.rc_context(SVG_RC):
        fig.savefig(path, format="svg", metadata={"Date": None})
    return path


def _figure(width=5.0, height=3.5) -> Figure:
    with matplotlib.rc_context(SVG_RC):
        fig = Figure(figsize=(width, height))
        fig.add_subplot(1, 1, 1)
    return fig


def scree_plot(lam, path, elbow: int | None = None, title: str = "Eigenvalues") -> Path:
    lam = np.asarray(lam, dtype=float)
    with matplotlib.rc_context(SVG_RC):
        fig = _figure()
        ax = fig.axes[0]
        q = np.arange(1, lam.size + 1)
        ax.bar(q, lam, color="#555555", width=0.7)
        if elbow:
            ax.axvline(elbow + 0.5, color="#c0392b", linestyle="--", linewidth=1,
                       label=f"elbow r={elbow}")
            ax.legend(frameon=False)
        ax.set_xlabel("q")
        ax.set_ylabel(r"$\lambda_q$")
        ax.set_title(title)
        if lam.size:
            ax.set_xlim(0.3, lam.size + 0.7)
        fig.tight_layout()
        return _save(fig, path)


def factorial_plane(scores, labels, mean_scores, path, axes=(1, 2)) -> Path:
    """Scatter of trial scores on two axes with the class-mean markers."""
    scores = np.asarray(scores, dtype=float)
    labels = np.asarray(labels)
    with matplotlib.rc_context(SVG_RC):
        fig = _figure(4.5, 4.0)
        ax = fig.axes[0]
        for c in (2, 1):
            pts = scores[labels == c]
            ax.scatter(pts[:, 0], pts[:, 1], s=6, alpha=0.5, color=CLASS_COLORS[c],
                       linewidths=0, label=CLASS_NAMES[c])
        for c, (sx, sy) in zip((1, 2), mean_scores):
            ax.scatter([sx], [sy], s=90, marker="X", color=CLASS_COLORS[c],
                       edgecolors="black", linewidths=0.8, label=f"mean {c}")
        ax.set_xlabel(f"axis {axes[0]}")
        ax.set_ylabel(f"axis {axes[1]}")
        ax.legend(frameon=False, fontsize=7)
        fig.tight_layout()
        return _save(fig, path)


def component_lines(x, columns, names, path, xlabel: str, ylabel: str = "") -> Path:
    """One line per column of ``columns`` over the grid ``x``."""
    columns = np.asarray(columns, dtype=float)
    with matplotlib.rc_context(SVG_RC):
        fig = _figure(6.0, 3.5)
        ax = fig.axes[0]
        for col, name in zip(columns.T, names):
            ax.plot(x, col, linewidth=1.2, label=name)
        ax.axhline(0.0, color="black", linewidth=0.6)
        ax.set_xlabel(xlabel)
        ax.set_ylabel(ylabel)
        ax.legend(frameon=False)
        fig.tight_layout()
        return _save(fig, path)


def component_map(coords, point_names, path, axes=(1, 2)) -> Path:
    """Points in the plane of two component axes, annotated by name."""
    coords = np.asarray(coords, dtype=float)
    with matplotlib.rc_context(SVG_RC):
        fig = _figure(4.5, 4.0)
        ax = fig.axes[0]
        ax.scatter(coords[:, 0], coords[:, 1], s=12, color="#2c7fb8")
        for (cx, cy), name in zip(coords, point_names):
            ax.annotate(name, (cx, cy), fontsize=6, xytext=(2, 2),
                        textcoords="offset points")
        ax.axhline(0.0, color="black", linewidth=0.6)
        ax.axvline(0.0, color="black", linewidth=0.6)
        ax.set_xlabel(f"axis {axes[0]}")
        ax.set_ylabel(f"axis {axes[1]}")
        fig.tight_layout()
        return _save(fig, path)
