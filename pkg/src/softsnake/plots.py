"""Vector-graphic exports: path traces, learning curves, event traces.

Every figure is written as an SVG plus the underlying data as a CSV so
plotted quantities can be re-read bit-exactly.
"""

from __future__ import annotations

import csv
from pathlib import Path
from typing import Optional

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt  # noqa: E402
import numpy as np  # noqa: E402
from matplotlib.collections import LineCollection  # noqa: E402

__all__ = [
    "write_table",
    "read_table",
    "plot_path",
    "plot_learning_curve",
    "plot_event_traces",
]


def write_table(path, header: list[str], rows: list[list]) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(header)
        writer.writerows(rows)
    return path


def read_table(path) -> tuple[list[str], list[list[str]]]:
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader)
        return header, list(reader)


def plot_path(positions: np.ndarray, rewards: np.ndarray, obstacles,
              goal, out_base) -> tuple[Path, Path]:
    """Head path colored by per-step reward over the obstacle field.

    `positions` is (T+1, 2); `rewards` is (T,) and colors the segment
    ending at each position.
    """
    positions = np.asarray(positions, dtype=float)
    rewards = np.asarray(rewards, dtype=float)
    out_base = Path(out_base)
    fig, ax = plt.subplots(figsize=(6, 6))
    segs = np.stack([positions[:-1], positions[1:]], axis=1)
    lc = LineCollection(segs, cmap="viridis", array=rewards, linewidths=2)
    ax.add_collection(lc)
    fig.colorbar(lc, ax=ax, label="per-step reward")
    for ob in obstacles:
        ax.add_patch(plt.Circle(ob.center, ob.radius, color="0.4"))
    ax.plot(*np.asarray(goal), marker="*", markersize=14, color="tab:red")
    ax.plot(*positions[0], marker="o", color="tab:green")
    ax.set_aspect("equal")
    ax.autoscale_view()
    ax.set_xlabel("x (m)")
    ax.set_ylabel("y (m)")
    svg = out_base.with_suffix(".svg")
    svg.parent.mkdir(parents=True, exist_ok=True)
    fig.savefig(svg)
    plt.close(fig)
    rows = [[f"{positions[i][0]!r}", f"{positions[i][1]!r}",
             f"{rewards[i - 1]!r}" if i else ""]
            for i in range(len(positions))]
    table = write_table(out_base.with_suffix(".csv"),
                        ["x", "y", "reward"], rows)
    return svg, table


def plot_learning_curve(log_records, out_base) -> tuple[Path, Path]:
    """Episode reward over training with phase/flag annotations."""
    out_base = Path(out_base)
    rewards = [r.episode_reward for r in log_records]
    phases = [r.phase for r in log_records]
    flags = [r.flag for r in log_records]
    iters = [r.macro_iteration for r in log_records]
    fig, ax = plt.subplots(figsize=(8, 4))
    x = np.arange(len(rewards))
    colors = {"eval": "0.5", "c1": "tab:blue", "r2": "tab:orange",
              "both": "0.5"}
    for key, color in colors.items():
        mask = [(p == "eval" and key in ("eval", "both") and f == key)
                or (p == "learn" and f == key)
                for p, f in zip(phases, flags)]
        mask = np.array(mask)
        if mask.any():
            ax.scatter(x[mask], np.asarray(rewards)[mask], s=12,
                       color=color, label=key)
    ax.set_xlabel("episode")
    ax.set_ylabel("episode reward")
    ax.legend()
    svg = out_base.with_suffix(".svg")
    svg.parent.mkdir(parents=True, exist_ok=True)
    fig.savefig(svg)
    plt.close(fig)
    rows = [[i, it, p, f, repr(rw)] for i, (it, p, f, rw) in
            enumerate(zip(iters, phases, flags, rewards))]
    table = write_table(out_base.with_suffix(".csv"),
                        ["episode", "macro_iteration", "phase", "flag",
                         "reward"], rows)
    return svg, table


def plot_event_traces(t: np.ndarray, traces: dict[str, np.ndarray],
                      trigger: Optional[np.ndarray], out_base
                      ) -> tuple[Path, Path]:
    """Stacked time series (tonic input, 1/sqrt(K_f), curvature, contact
    force) with event-trigger intervals shaded."""
    out_base = Path(out_base)
    t = np.asarray(t, dtype=float)
    names = list(traces)
    fig, axes = plt.subplots(len(names), 1, figsize=(8, 2 * len(names)),
                             sharex=True)
    if len(names) == 1:
        axes = [axes]
    for ax, name in zip(axes, names):
        ax.plot(t, traces[name], lw=1)
        ax.set_ylabel(name)
        if trigger is not None:
            ax.fill_between(t, *ax.get_ylim(), where=np.asarray(
                trigger, dtype=bool), alpha=0.15, color="tab:red")
    axes[-1].set_xlabel("time (s)")
    svg = out_base.with_suffix(".svg")
    svg.parent.mkdir(parents=True, exist_ok=True)
    fig.savefig(svg)
    plt.close(fig)
    header = ["t"] + names + (["trigger"] if trigger is not None else [])
    rows = []
    for i in range(len(t)):
        row = [repr(float(t[i]))] + [repr(float(traces[n][i]))
                                     for n in names]
        if trigger is not None:
            rows.append(row + [int(trigger[i])])
        else:
            rows.append(row)
    table = write_table(out_base.with_suffix(".csv"), header, rows)
    return svg, table
