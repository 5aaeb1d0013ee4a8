"""Figures written next to the CSV reports."""

from __future__ import annotations

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt  # noqa: E402
import numpy as np  # noqa: E402
from matplotlib.patches import Circle as CirclePatch  # noqa: E402

from .core import CraterDb  # noqa: E402
from .harness import METHODS, AggregateStats, RunMetrics  # noqa: E402
from .world import TrajectoryLog  # noqa: E402

COLORS = {"dead_reckoning": "tab:gray", "particle_filter": "tab:blue", "gmm": "tab:green", "truth": "black"}
LABELS = {"dead_reckoning": "dead reckoning", "particle_filter": "particle filter", "gmm": "GMM matching"}
BASELINE_COLOR = "tab:red"

# no software/date stamps, so reruns give identical files
_METADATA = {"Software": None}


def _save(fig, path) -> None:
    fig.tight_layout()
    fig.savefig(path, dpi=120, metadata=_METADATA)
    plt.close(fig)


def plot_trajectory(log: TrajectoryLog, truth_db: CraterDb, map_db: CraterDb, path) -> None:
    """Crater field with the true, dead-reckoned and estimated tracks."""
    fig, ax = plt.subplots(figsize=(7, 7))
    mapped = set(map_db.ids.tolist())
    for c in truth_db:
        ax.add_patch(CirclePatch((c.x, c.y), c.radius, fill=False, lw=0.8,
                                 color="tab:blue" if c.id in mapped else "tab:orange"))
    ax.plot(log.truth[:, 0], log.truth[:, 1], color=COLORS["truth"], lw=1.5, label="truth")
    for name, track in (("dead_reckoning", log.dead_reckoning), ("particle_filter", log.pf), ("gmm", log.gmm)):
        ax.plot(track[:, 0], track[:, 1], color=COLORS[name], lw=1.0, label=LABELS[name])
    ext = truth_db.extent
    if ext.width > 0 and ext.height > 0:
        ax.set_xlim(ext.xmin, ext.xmax)
        ax.set_ylim(ext.ymin, ext.ymax)
    ax.set_aspect("equal")
    ax.set_xlabel("east [m]")
    ax.set_ylabel("north [m]")
    ax.legend(loc="upper left", fontsize=8)
    _save(fig, path)


def plot_run_errors(metrics: RunMetrics, path) -> None:
    fig, ax = plt.subplots(figsize=(7, 4))
    steps = np.arange(len(metrics.baseline_2pct))
    for m in METHODS:
        ax.plot(steps, metrics.errors[m], color=COLORS[m], label=LABELS[m])
    ax.plot(steps, metrics.baseline_2pct, color=BASELINE_COLOR, ls="--", label="2% of distance")
    ax.set_xlabel("step")
    ax.set_ylabel("position error [m]")
    ax.legend(fontsize=8)
    _save(fig, path)


def plot_error_curves(stats: AggregateStats, path, title: str = "") -> None:
    """Mean error vs step over all runs, with the 2% line."""
    fig, ax = plt.subplots(figsize=(7, 4))
    steps = np.arange(len(stats.baseline_curve))
    for m in METHODS:
        if m in stats.mean_curves:
            ax.plot(steps, stats.mean_curves[m], color=COLORS[m], label=LABELS[m])
    ax.plot(steps, stats.baseline_curve, color=BASELINE_COLOR, ls="--", label="2% of distance")
    ax.set_xlabel("step")
    ax.set_ylabel(f"mean position error over {stats.n} runs [m]")
    if title:
        ax.set_title(title)
    ax.legend(fontsize=8)
    _save(fig, path)


def plot_final_error_hist(stats: AggregateStats, path) -> None:
    """Final-error distributions for the two localizers against the 2% line."""
    fig, axes = plt.subplots(1, 2, figsize=(9, 3.5), sharey=True)
    for ax, m in zip(axes, ("particle_filter", "gmm")):
        finals = stats.methods[m].finals
        bins = np.linspace(0.0, max(finals.max(), stats.baseline_final) * 1.05, 21)
        ax.hist(finals, bins=bins, color=COLORS[m], alpha=0.8)
        ax.axvline(stats.baseline_final, color=BASELINE_COLOR, ls="--")
        ax.set_title(LABELS[m])
        ax.set_xlabel("final position error [m]")
    axes[0].set_ylabel("runs")
    _save(fig, path)


def plot_masking(table: dict[float, AggregateStats], path) -> None:
    fracs = sorted(table)
    fig, ax = plt.subplots(figsize=(6, 4))
    for m in METHODS:
        ax.plot([100 * f for f in fracs], [table[f].methods[m].mean_final for f in fracs],
                marker="o", color=COLORS[m], label=LABELS[m])
    ax.plot([100 * f for f in fracs], [table[f].baseline_final for f in fracs],
            color=BASELINE_COLOR, ls="--", label="2% of distance")
    ax.set_xlabel("orbital craters masked [%]")
    ax.set_ylabel("mean final error [m]")
    ax.legend(fontsize=8)
    _save(fig, path)
