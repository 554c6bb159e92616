"""Top-down matplotlib renderings of worlds, traces, and batch summaries.

All functions render to an Axes or straight to a file; nothing here opens a
window (the Agg backend is forced), so the module is safe headless.
"""

from __future__ import annotations

import math
from pathlib import Path

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt
import numpy as np
from matplotlib.patches import Circle, FancyArrow, Rectangle

from .grid import FREE, OCCUPIED

_PHASE_COLORS = {
    "NavigatingIntermediate": "#1f77b4",
    "SeekingReferredPerson": "#9467bd",
    "ApproachingFinal": "#2ca02c",
}


def draw_grid(ax, grid):
    """Occupancy raster: white free, black occupied, grey unknown."""
    img = np.full(grid.cells.shape, 0.82)
    img[grid.cells == FREE] = 1.0
    img[grid.cells == OCCUPIED] = 0.0
    x0, y0 = grid.origin.x, grid.origin.y
    ax.imshow(
        img,
        cmap="gray",
        vmin=0.0,
        vmax=1.0,
        origin="lower",
        extent=[x0, x0 + grid.width * grid.resolution,
                y0, y0 + grid.height * grid.resolution],
        interpolation="nearest",
    )
    ax.set_aspect("equal")
    ax.set_xlabel("x [m]")
    ax.set_ylabel("y [m]")


def draw_world(ax, world):
    """Objects, instructors and the robot on top of the grid."""
    draw_grid(ax, world.grid)
    for obj in world.objects:
        xmin, ymin, xmax, ymax = obj.footprint
        ax.add_patch(
            Rectangle((xmin, ymin), xmax - xmin, ymax - ymin,
                      facecolor="#ff7f0e", edgecolor="k", alpha=0.8)
        )
        ax.annotate(obj.id, obj.centroid, fontsize=7, ha="center",
                    va="bottom", xytext=(0, 6), textcoords="offset points")
    for ins in world.instructors:
        ax.add_patch(Circle((ins.base.x, ins.base.y), 0.18,
                            facecolor="#d62728", edgecolor="k", zorder=5))
        _heading_arrow(ax, ins.base, 0.35, "#d62728")
        ax.annotate(ins.id, (ins.base.x, ins.base.y), fontsize=7, ha="center",
                    va="bottom", xytext=(0, 8), textcoords="offset points")
    pose = world.robot.pose
    ax.add_patch(Circle((pose.x, pose.y), world.robot.radius,
                        facecolor="#1f77b4", edgecolor="k", zorder=6))
    _heading_arrow(ax, pose, world.robot.radius * 1.8, "#1f77b4")


def draw_trace(ax, world, records):
    """Trajectory, pointing ray, goals and planned paths from trace records."""
    draw_world(ax, world)
    poses = [(r["t"], r["state"], r["pose"]) for r in records if "pose" in r]
    for (_, state, a), (_, _, b) in zip(poses, poses[1:]):
        ax.plot([a[0], b[0]], [a[1], b[1]],
                color=_PHASE_COLORS.get(state, "#7f7f7f"), lw=1.4, zorder=4)
    for rec in records:
        if "estimate" in rec and "anchor" in rec:
            ax_, ay_ = rec["anchor"]
            az = rec["estimate"]["azimuth"]
            depth = rec["estimate"]["depth"]
            ax.plot([ax_, ax_ + 6.0 * math.cos(az)],
                    [ay_, ay_ + 6.0 * math.sin(az)],
                    "--", color="#d62728", lw=1.0, zorder=3,
                    label=f"pointing ray (d={depth:.2f} m)")
            ax.plot(ax_, ay_, "x", color="#d62728", ms=8, zorder=5)
        if "goal" in rec:
            gx, gy, _ = rec["goal"]
            ax.plot(gx, gy, "*", color="#2ca02c", ms=12, zorder=5)
        if "path" in rec:
            pts = np.array([[p[0], p[1]] for p in rec["path"]])
            ax.plot(pts[:, 0], pts[:, 1], ":", color="#17becf", lw=1.0, zorder=3)
    terminal = records[-1] if records and records[-1].get("terminal") else None
    title = ""
    if terminal:
        title = terminal["outcome"]
        if terminal.get("reason"):
            title += f" ({terminal['reason']})"
        if terminal.get("stop_reason"):
            title += f" [{terminal['stop_reason']}]"
    ax.set_title(title)
    handles, labels = ax.get_legend_handles_labels()
    if handles:
        seen = dict(zip(labels, handles))
        ax.legend(seen.values(), seen.keys(), fontsize=7, loc="lower right")


def _heading_arrow(ax, pose, length, color):
    ax.add_patch(
        FancyArrow(pose.x, pose.y, length * math.cos(pose.theta),
                   length * math.sin(pose.theta), width=0.02,
                   head_width=0.08, color=color, zorder=7)
    )


def export_topdown(world, records, out_path) -> Path:
    """Render one trace to an image file; format follows the extension."""
    out_path = Path(out_path)
    fig, ax = plt.subplots(figsize=(8, 6.5))
    draw_trace(ax, world, records)
    fig.tight_layout()
    fig.savefig(out_path)
    plt.close(fig)
    return out_path


def export_batch_summary(rows, out_path) -> Path:
    """Bar chart of per-scenario success rates with failure annotations."""
    out_path = Path(out_path)
    names = [r["scenario"] for r in rows]
    rates = [r["success_rate"] for r in rows]
    fig, ax = plt.subplots(figsize=(max(4, 1.6 * len(rows)), 4))
    bars = ax.bar(names, rates, color="#2ca02c")
    for bar, row in zip(bars, rows):
        ax.annotate(f"{row['success_rate']:.0%}",
                    (bar.get_x() + bar.get_width() / 2, bar.get_height()),
                    ha="center", va="bottom", fontsize=8)
        if row["failures"]:
            txt = ", ".join(f"{k}:{v}" for k, v in sorted(row["failures"].items()))
            ax.annotate(txt, (bar.get_x() + bar.get_width() / 2, 0.02),
                        ha="center", va="bottom", fontsize=6, rotation=90)
    ax.set_ylim(0, 1.12)
    ax.set_ylabel("success rate")
    ax.tick_params(axis="x", rotation=20)
    fig.tight_layout()
    fig.savefig(out_path)
    plt.close(fig)
    return out_path
