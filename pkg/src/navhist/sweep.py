"""Grid sweeps of the sampler hyper-parameters over a set of trajectories."""

from __future__ import annotations

import csv
import io
import itertools
from dataclasses import dataclass
from typing import Iterable, Sequence

from .core import SamplerConfig, Trajectory
from .sampler import redundancy_stats, sample_history

COLUMNS = (
    "trajectory",
    "w",
    "epsilon",
    "tau",
    "n_total",
    "n_selected",
    "n_padded",
    "retained_fraction",
    "n_pairs",
    "min_pairwise_dist_m",
    "mean_pairwise_cos",
)

# (W, epsilon, tau) rows of the published hyper-parameter table, in order.
PAPER_GRID: tuple[tuple[int, float, float], ...] = (
    (20, 0.1, 0.0),
    (40, 0.1, 0.0),
    (60, 0.1, 0.0),
    (80, 0.1, 0.0),
    (100, 0.1, 0.0),
    (60, 0.05, 0.0),
    (60, 0.1, 0.0),
    (60, 0.15, 0.0),
    (60, 0.2, 0.0),
    (60, 0.1, 0.9),
    (60, 0.1, 0.95),
    (60, 0.1, 0.99),
)


@dataclass(frozen=True)
class SweepSpec:
    w_values: Sequence[int]
    epsilon_values: Sequence[float]
    tau_values: Sequence[float]

    def __post_init__(self) -> None:
        if not (self.w_values and self.epsilon_values and self.tau_values):
            raise ValueError("sweep lists must all be non-empty")
        # validate every value up front
        for w, e, t in self.grid():
            SamplerConfig(w, e, t)

    def grid(self) -> list[tuple[int, float, float]]:
        return list(itertools.product(self.w_values, self.epsilon_values, self.tau_values))


def run_sweep(
    trajectories: Sequence[tuple[str, Trajectory]],
    grid: Iterable[tuple[int, float, float]],
) -> list[dict]:
    """One row per (grid point, trajectory), grid-major in the given order."""
    rows = []
    for w, eps, tau in grid:
        cfg = SamplerConfig(window_w=int(w), epsilon_m=float(eps), tau=float(tau))
        for name, traj in trajectories:
            try:
                hist = sample_history(traj, cfg)
                st = redundancy_stats(traj, hist)
            except Exception as exc:
                raise RuntimeError(f"sweep failed at W={w}, epsilon={eps}, tau={tau}, trajectory={name}: {exc}") from exc
            rows.append(
                {
                    "trajectory": name,
                    "w": cfg.window_w,
                    "epsilon": cfg.epsilon_m,
                    "tau": cfg.tau,
                    "n_total": st.n_total,
                    "n_selected": st.n_selected,
                    "n_padded": st.n_padded,
                    "retained_fraction": st.retained_fraction,
                    "n_pairs": st.n_pairs,
                    "min_pairwise_dist_m": st.min_pairwise_dist_m,
                    "mean_pairwise_cos": st.mean_pairwise_cos,
                }
            )
    return rows


def rows_to_csv(rows: Iterable[dict]) -> str:
    buf = io.StringIO()
    writer = csv.DictWriter(buf, fieldnames=COLUMNS, lineterminator="\n")
    writer.writeheader()
    for r in rows:
        writer.writerow({k: repr(v) if isinstance(v, float) else v for k, v in r.items()})
    return buf.getvalue()
