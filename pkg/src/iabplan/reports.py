"""Report exports: signal heatmap grid, trial tables, optional figures.

The delimited text outputs are the primary artifacts and are byte-stable;
PNG rendering is opt-in from the CLI and draws the same data.
"""

from __future__ import annotations

from pathlib import Path

import numpy as np

from .netgraph import NetworkState, node_positions
from .propagation import ACCESS, evaluate_link
from .resilience import FailureTrialStats
from .scenario import Scenario

# Cells whose best received power falls below the rendering floor are
# written as the sentinel so downstream tooling can mask them.
SIGNAL_FLOOR_DBM = -96.0
SENTINEL_DBM = -120.0


def heatmap_grid(scenario: Scenario, state: NetworkState) -> np.ndarray:
    """Best access received power (dBm) per coverage cell, as a (ny, nx) grid.

    Rows index the cell's y tile, columns the x tile. Values below the
    floor become the sentinel.
    """
    nx = round(scenario.area_m[0] / scenario.grid_spacing_m)
    ny = round(scenario.area_m[1] / scenario.grid_spacing_m)
    pos = node_positions(scenario)
    deployed_pos = [pos[i] for i in sorted(state.deployed)]

    grid = np.full((ny, nx), SENTINEL_DBM)
    for cell_id, center in scenario.coverage_cells:
        best = -np.inf
        for npos in deployed_pos:
            if npos == center:
                best = 0.0  # co-located transmitter saturates the scale
                break
            budget = evaluate_link(npos, center, ACCESS, scenario.radio)
            best = max(best, budget.rx_power_dbm)
        j, i = divmod(cell_id, nx)
        grid[j, i] = best if best >= SIGNAL_FLOOR_DBM else SENTINEL_DBM
    return grid


def write_heatmap_csv(grid: np.ndarray, path: str | Path) -> None:
    """Comma-delimited grid, one row per y tile (ascending), 2 decimals."""
    lines = [",".join(f"{v:.2f}" for v in row) for row in grid]
    Path(path).write_text("\n".join(lines) + "\n")


def write_trials_csv(stats: list[FailureTrialStats], path: str | Path) -> None:
    lines = ["fraction,trials,retention_mean,retention_std,retention_min"]
    for s in stats:
        lines.append(
            f"{s.failure_fraction:.6g},{s.trials},"
            f"{s.retention_mean:.6f},{s.retention_std:.6f},{s.retention_min:.6f}"
        )
    Path(path).write_text("\n".join(lines) + "\n")


def write_per_trial_csv(stats: list[FailureTrialStats], path: str | Path) -> None:
    lines = ["fraction,trial,retention"]
    for s in stats:
        for t, r in enumerate(s.retentions):
            lines.append(f"{s.failure_fraction:.6g},{t},{r:.6f}")
    Path(path).write_text("\n".join(lines) + "\n")


def trials_table(stats: list[FailureTrialStats]) -> str:
    header = f"{'fraction':>8}  {'trials':>6}  {'mean':>8}  {'std':>8}  {'min':>8}"
    rows = [header]
    for s in stats:
        rows.append(
            f"{s.failure_fraction:>8.2f}  {s.trials:>6d}  "
            f"{s.retention_mean:>8.4f}  {s.retention_std:>8.4f}  {s.retention_min:>8.4f}"
        )
    return "\n".join(rows)


def render_heatmap_png(
    grid: np.ndarray, scenario: Scenario, state: NetworkState, path: str | Path
) -> None:
    """Render the signal map with donor/node markers to a PNG file."""
    import matplotlib

    matplotlib.use("Agg")
    import matplotlib.pyplot as plt

    w, h = scenario.area_m
    fig, ax = plt.subplots(figsize=(7, 6))
    shown = np.where(grid <= SENTINEL_DBM, np.nan, grid)
    im = ax.imshow(
        shown,
        origin="lower",
        extent=(0, w, 0, h),
        cmap="viridis",
        vmin=SIGNAL_FLOOR_DBM,
        vmax=-10.0,
    )
    fig.colorbar(im, ax=ax, label="best received power (dBm)")
    pos = node_positions(scenario)
    donor_xy = np.array([pos[i] for i in sorted(scenario.donor_ids)])
    ax.scatter(donor_xy[:, 0], donor_xy[:, 1], marker="s", c="red", s=60, label="donor")
    deployed = sorted(state.deployed - scenario.donor_ids)
    if deployed:
        node_xy = np.array([pos[i] for i in deployed])
        ax.scatter(node_xy[:, 0], node_xy[:, 1], marker="^", c="blue", s=40, label="node")
    for p, q in sorted(state.active_links):
        (x0, y0), (x1, y1) = pos[p], pos[q]
        ax.plot([x0, x1], [y0, y1], c="black", lw=0.6, alpha=0.6, zorder=1)
    ax.set_xlabel("x (m)")
    ax.set_ylabel("y (m)")
    ax.legend(loc="upper right")
    fig.tight_layout()
    fig.savefig(path, dpi=150)
    plt.close(fig)


def render_retention_png(stats: list[FailureTrialStats], path: str | Path) -> None:
    """Mean retention (with std band) versus failure fraction."""
    import matplotlib

    matplotlib.use("Agg")
    import matplotlib.pyplot as plt

    fractions = [s.failure_fraction for s in stats]
    means = [s.retention_mean for s in stats]
    stds = [s.retention_std for s in stats]
    fig, ax = plt.subplots(figsize=(6, 4))
    ax.errorbar(fractions, means, yerr=stds, marker="o", capsize=4)
    ax.set_xlabel("failed backhaul link fraction")
    ax.set_ylabel("coverage retention")
    ax.set_ylim(0, 1.05)
    ax.grid(True, alpha=0.3)
    fig.tight_layout()
    fig.savefig(path, dpi=150)
    plt.close(fig)
