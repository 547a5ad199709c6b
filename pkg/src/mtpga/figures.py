"""File renderings of the analysis artifacts: PNG figures and CSV tables
written next to the JSON outputs."""

from __future__ import annotations

import csv

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt
import numpy as np

from .analysis import CorrelationView, Layout2D


def save_layout_figure(layout: Layout2D, path: str) -> None:
    fig, ax = plt.subplots(figsize=(6, 5))
    pts = layout.points
    ax.scatter(pts[:, 0], pts[:, 1], s=42, c="#2a6f97", zorder=3)
    if layout.labels is not None:
        for (x, y), lbl in zip(pts, layout.labels):
            ax.annotate(str(lbl), (x, y), textcoords="offset points", xytext=(5, 4), fontsize=8)
    ax.set_xlabel("axis 1 (scaled coordinate)")
    ax.set_ylabel("axis 2 (scaled coordinate)")
    ax.set_title("ensemble layout")
    ax.grid(True, alpha=0.3)
    fig.tight_layout()
    fig.savefig(path, dpi=130)
    plt.close(fig)


def save_layout_csv(layout: Layout2D, ids: list[str], path: str) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh)
        w.writerow(["member", "x", "y"])
        for mid, (x, y) in zip(ids, layout.points):
            w.writerow([mid, repr(float(x)), repr(float(y))])


def save_stats_figure(
    variances: list[float], view: CorrelationView, sim: float, path: str
) -> None:
    fig, (ax1, ax2) = plt.subplots(1, 2, figsize=(10, 5))

    ax1.bar(range(1, len(variances) + 1), variances, color="#2a6f97")
    ax1.set_xticks(range(1, len(variances) + 1))
    ax1.set_xlabel("axis")
    ax1.set_ylabel("projected variance fraction")
    ax1.set_title(f"variance per axis (SIM = {sim:.3f})")

    circle = plt.Circle((0, 0), 1.0, fill=False, color="gray", linewidth=1)
    ax2.add_patch(circle)
    for k, (x, y) in enumerate(view.arrows):
        if view.flags[k]:
            continue
        ax2.annotate(
            "",
            xy=(x, y),
            xytext=(0, 0),
            arrowprops=dict(arrowstyle="->", color="#c1121f", lw=1.2),
        )
        ax2.annotate(str(k), (x, y), fontsize=7, color="#555555")
    ax2.set_xlim(-1.1, 1.1)
    ax2.set_ylim(-1.1, 1.1)
    ax2.set_aspect("equal")
    ax2.set_xlabel("correlation with axis 1")
    ax2.set_ylabel("correlation with axis 2")
    ax2.set_title("persistence correlation")
    fig.tight_layout()
    fig.savefig(path, dpi=130)
    plt.close(fig)


def save_correlation_csv(view: CorrelationView, path: str) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh)
        w.writerow(["branch", "rho_axis1", "rho_axis2", "flagged"])
        for k, ((x, y), flag) in enumerate(zip(view.arrows, view.flags)):
            w.writerow([k, repr(float(x)), repr(float(y)), int(flag)])
