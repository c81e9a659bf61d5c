"""Figures for sampling runs and hyper-parameter sweeps.

Everything renders through the Agg backend straight to files; nothing
here opens a window.
"""

from __future__ import annotations

import os
from collections import defaultdict
from typing import Iterable, Mapping

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402
import numpy as np  # noqa: E402

from .core import SampledHistory, Trajectory  # noqa: E402

RC = {
    "font.size": 9,
    "axes.labelsize": 9,
    "axes.titlesize": 10,
    "legend.fontsize": 7,
    "xtick.labelsize": 8,
    "ytick.labelsize": 8,
    "axes.spines.top": False,
    "axes.spines.right": False,
    "savefig.dpi": 120,
    "svg.hashsalt": "navhist",
}

SWEEP_AXES = (("w", "window size W"), ("epsilon", "epsilon (m)"), ("tau", "tau"))


def plot_selection(traj: Trajectory, history: SampledHistory, path: str | os.PathLike) -> None:
    """Top-down view of the trajectory with the selected frames highlighted."""
    pos = traj.positions()
    chosen = sorted(set(history.source_t[: history.n_valid]))
    with plt.rc_context(RC):
        fig, ax = plt.subplots(figsize=(4.5, 4.5))
        if len(pos):
            ax.plot(pos[:, 0], pos[:, 1], color="0.75", lw=0.8, label="path")
            if chosen:
                sel = pos[chosen]
                ax.scatter(sel[:, 0], sel[:, 1], s=14, c=chosen, cmap="viridis", label="selected", zorder=3)
            ax.scatter(pos[-1, 0], pos[-1, 1], marker="*", s=80, color="crimson", label="current", zorder=4)
        ax.set_aspect("equal", adjustable="datalim")
        ax.set_xlabel("x (m)")
        ax.set_ylabel("y (m)")
        ax.set_title(f"{history.n_valid} of {len(traj)} frames kept (W={history.window_w})")
        ax.legend(loc="best", frameon=False)
        fig.tight_layout()
        fig.savefig(path)
        plt.close(fig)


def plot_sweep(rows: Iterable[Mapping], out_dir: str | os.PathLike) -> list[str]:
    """One figure per swept parameter: retained fraction against that parameter.

    Curves are drawn per trajectory with the other two parameters held at
    their most common value in ``rows``. Returns the written file paths.
    """
    rows = list(rows)
    os.makedirs(out_dir, exist_ok=True)
    written = []
    for key, label in SWEEP_AXES:
        others = [k for k, _ in SWEEP_AXES if k != key]
        modes = {k: _mode(float(r[k]) for r in rows) for k in others}
        series: dict[str, list[tuple[float, float]]] = defaultdict(list)
        for r in rows:
            if all(float(r[k]) == modes[k] for k in others):
                series[str(r["trajectory"])].append((float(r[key]), float(r["retained_fraction"])))
        if not any(len({x for x, _ in pts}) > 1 for pts in series.values()):
            continue
        with plt.rc_context(RC):
            fig, ax = plt.subplots(figsize=(4.5, 3.0))
            for name, pts in sorted(series.items()):
                pts.sort()
                xs, ys = np.array(pts).T
                ax.plot(xs, ys, marker="o", ms=3, lw=1, label=name)
            ax.set_xlabel(label)
            ax.set_ylabel("retained fraction")
            fixed = ", ".join(f"{k}={modes[k]:g}" for k in others)
            ax.set_title(f"sweep over {key} ({fixed})")
            ax.set_ylim(0, 1.05)
            ax.legend(frameon=False)
            fig.tight_layout()
            path = os.path.join(out_dir, f"sweep_{key}.png")
            fig.savefig(path)
            plt.close(fig)
        written.append(path)
    return written


def _mode(values: Iterable[float]) -> float:
    counts: dict[float, int] = defaultdict(int)
    for v in values:
        counts[v] += 1
    return max(sorted(counts), key=lambda v: counts[v])
