"""Occupancy grid, inflation, A* planning with shortcutting, and raycasting.

Cell values: 0 = free, 1 = occupied, 2 = unknown. Unknown cells are treated
as obstacles everywhere (conservative reading of a prebuilt map).
"""

from __future__ import annotations

import heapq
import math
from dataclasses import dataclass, field
from pathlib import Path as FilePath

import numpy as np
import yaml
from scipy import ndimage

from .errors import GoalOccupied, NoPath, OriginOutsideGrid
from .geometry import Pose2

FREE, OCCUPIED, UNKNOWN = 0, 1, 2

# Diagonal inflation margin (cells) added on top of the robot radius so that
# tracking error of the follower can never clip an obstacle.
SAFETY_MARGIN_CELLS = 2


@dataclass(frozen=True, eq=False)
class OccupancyGrid:
    """Row-major grid; cells[row, col] with row = y index, col = x index."""

    resolution: float
    origin: Pose2
    cells: np.ndarray

    def __post_init__(self):
        if self.resolution <= 0:
            raise ValueError("resolution must be positive")
        c = np.asarray(self.cells, dtype=np.uint8)
        object.__setattr__(self, "cells", c)

    @property
    def height(self) -> int:
        return self.cells.shape[0]

    @property
    def width(self) -> int:
        return self.cells.shape[1]

    def world_to_cell(self, x: float, y: float) -> tuple[int, int]:
        col = int(math.floor((x - self.origin.x) / self.resolution))
        row = int(math.floor((y - self.origin.y) / self.resolution))
        return row, col

    def cell_center(self, row: int, col: int) -> tuple[float, float]:
        return (
            self.origin.x + (col + 0.5) * self.resolution,
            self.origin.y + (row + 0.5) * self.resolution,
        )

    def in_bounds(self, row: int, col: int) -> bool:
        return 0 <= row < self.height and 0 <= col < self.width

    def contains_point(self, x: float, y: float) -> bool:
        return self.in_bounds(*self.world_to_cell(x, y))

    def is_free(self, x: float, y: float) -> bool:
        row, col = self.world_to_cell(x, y)
        return self.in_bounds(row, col) and self.cells[row, col] == FREE

    def with_boxes(self, boxes) -> "OccupancyGrid":
        """Grid with axis-aligned boxes [(xmin, ymin, xmax, ymax), ...]
        rasterized as occupied (cells whose center lies inside a box)."""
        cells = self.cells.copy()
        xs = self.origin.x + (np.arange(self.width) + 0.5) * self.resolution
        ys = self.origin.y + (np.arange(self.height) + 0.5) * self.resolution
        for xmin, ymin, xmax, ymax in boxes:
            ci = (xs >= xmin) & (xs <= xmax)
            ri = (ys >= ymin) & (ys <= ymax)
            cells[np.ix_(ri, ci)] = OCCUPIED
        return OccupancyGrid(self.resolution, self.origin, cells)


def inflate(grid: OccupancyGrid, radius: float) -> OccupancyGrid:
    """Mark every cell within `radius` (Chebyshev metric) of an obstacle as
    occupied; unknown cells count as obstacles."""
    if radius < 0:
        raise ValueError("radius must be non-negative")
    blocked = grid.cells != FREE
    k = int(math.floor(radius / grid.resolution + 1e-9))
    if k > 0:
        blocked = ndimage.binary_dilation(blocked, np.ones((2 * k + 1, 2 * k + 1), bool))
    cells = np.where(blocked, OCCUPIED, FREE).astype(np.uint8)
    return OccupancyGrid(grid.resolution, grid.origin, cells)


def raycast(grid: OccupancyGrid, origin, azimuth: float, max_range: float):
    """March a ray through the grid (Amanatides-Woo traversal).

    Returns (range, hit): distance to the first non-free cell, or max_range
    with hit=False when nothing blocks the ray.
    """
    ox, oy = float(origin[0]), float(origin[1])
    row, col = grid.world_to_cell(ox, oy)
    if not grid.in_bounds(row, col):
        raise OriginOutsideGrid(f"origin ({ox}, {oy}) outside grid")
    if grid.cells[row, col] != FREE:
        return 0.0, True

    dx, dy = math.cos(azimuth), math.sin(azimuth)
    step_c = 1 if dx > 0 else -1
    step_r = 1 if dy > 0 else -1
    res = grid.resolution
    # Distance along the ray to the next vertical / horizontal cell border.
    if abs(dx) < 1e-12:
        t_max_x, t_delta_x = math.inf, math.inf
    else:
        next_x = grid.origin.x + (col + (1 if dx > 0 else 0)) * res
        t_max_x = (next_x - ox) / dx
        t_delta_x = res / abs(dx)
    if abs(dy) < 1e-12:
        t_max_y, t_delta_y = math.inf, math.inf
    else:
        next_y = grid.origin.y + (row + (1 if dy > 0 else 0)) * res
        t_max_y = (next_y - oy) / dy
        t_delta_y = res / abs(dy)

    while True:
        if t_max_x < t_max_y:
            t = t_max_x
            t_max_x += t_delta_x
            col += step_c
        else:
            t = t_max_y
            t_max_y += t_delta_y
            row += step_r
        if t > max_range:
            return max_range, False
        if not grid.in_bounds(row, col) or grid.cells[row, col] != FREE:
            return t, True


def _supercover_cells(grid: OccupancyGrid, a, b):
    """All cells touched by segment a-b, via dense sub-cell sampling."""
    ax, ay = a
    bx, by = b
    dist = math.hypot(bx - ax, by - ay)
    n = max(2, int(math.ceil(dist / (grid.resolution * 0.25))) + 1)
    for i in range(n):
        t = i / (n - 1)
        yield grid.world_to_cell(ax + t * (bx - ax), ay + t * (by - ay))


def line_of_sight(grid: OccupancyGrid, a, b) -> bool:
    """True when every cell touched by segment a-b is free."""
    for row, col in _supercover_cells(grid, a, b):
        if not grid.in_bounds(row, col) or grid.cells[row, col] != FREE:
            return False
    return True


@dataclass(frozen=True)
class PlanPath:
    """Planned path; consecutive waypoints are line-of-sight free on the
    inflated grid used for planning."""

    waypoints: tuple[Pose2, ...]
    length: float

    def __len__(self):
        return len(self.waypoints)


_SQRT2 = math.sqrt(2.0)
_MOVES = [
    (0, 1, 1.0), (0, -1, 1.0), (1, 0, 1.0), (-1, 0, 1.0),
    (1, 1, _SQRT2), (1, -1, _SQRT2), (-1, 1, _SQRT2), (-1, -1, _SQRT2),
]


def _octile(r0, c0, r1, c1) -> float:
    dr, dc = abs(r0 - r1), abs(c0 - c1)
    return (dr + dc) + (_SQRT2 - 2.0) * min(dr, dc)


def _astar_cells(grid: OccupancyGrid, start_cell, goal_cell):
    """Grid-optimal 8-connected A* with octile heuristic, in cell units."""
    h, w = grid.height, grid.width
    free = grid.cells == FREE
    sr, sc = start_cell
    gr, gc = goal_cell
    g_cost = np.full((h, w), np.inf)
    g_cost[sr, sc] = 0.0
    parent = {}
    heap = [(_octile(sr, sc, gr, gc), sr, sc)]
    while heap:
        f, r, c = heapq.heappop(heap)
        if (r, c) == (gr, gc):
            cells = [(r, c)]
            while (r, c) in parent:
                r, c = parent[(r, c)]
                cells.append((r, c))
            return cells[::-1]
        if f > g_cost[r, c] + _octile(r, c, gr, gc) + 1e-12:
            continue
        for dr, dc, w_move in _MOVES:
            nr, nc = r + dr, c + dc
            if not (0 <= nr < h and 0 <= nc < w) or not free[nr, nc]:
                continue
            # Disallow diagonal moves that cut an occupied corner.
            if dr and dc and not (free[r, nc] and free[nr, c]):
                continue
            ng = g_cost[r, c] + w_move
            if ng < g_cost[nr, nc] - 1e-12:
                g_cost[nr, nc] = ng
                parent[(nr, nc)] = (r, c)
                heapq.heappush(heap, (ng + _octile(nr, nc, gr, gc), nr, nc))
    return None


def plan(grid: OccupancyGrid, start: Pose2, goal: Pose2, robot_radius: float) -> PlanPath:
    """Collision-free path from start to goal on the inflated grid.

    A* over the 8-connected grid followed by greedy line-of-sight
    shortcutting; the goal heading is taken from the requested goal pose.
    """
    inflated = inflate(grid, robot_radius + SAFETY_MARGIN_CELLS * grid.resolution)
    start_cell = inflated.world_to_cell(start.x, start.y)
    goal_cell = inflated.world_to_cell(goal.x, goal.y)
    if not inflated.in_bounds(*goal_cell) or inflated.cells[goal_cell] != FREE:
        raise GoalOccupied(f"goal {goal} occupied after inflation")
    if not inflated.in_bounds(*start_cell) or inflated.cells[start_cell] != FREE:
        raise GoalOccupied(f"start {start} occupied after inflation")

    if start_cell == goal_cell:
        return PlanPath((Pose2(start.x, start.y, goal.theta),), 0.0)

    cells = _astar_cells(inflated, start_cell, goal_cell)
    if cells is None:
        raise NoPath(f"no path from {start} to {goal}")

    pts = [(start.x, start.y)]
    pts += [inflated.cell_center(r, c) for r, c in cells[1:-1]]
    pts.append((goal.x, goal.y))

    # Greedy shortcutting: keep jumping to the farthest visible point.
    kept = [pts[0]]
    i = 0
    while i < len(pts) - 1:
        j = len(pts) - 1
        while j > i + 1 and not line_of_sight(inflated, pts[i], pts[j]):
            j -= 1
        kept.append(pts[j])
        i = j

    waypoints = []
    for idx, (x, y) in enumerate(kept):
        if idx + 1 < len(kept):
            nx, ny = kept[idx + 1]
            theta = math.atan2(ny - y, nx - x)
        else:
            theta = goal.theta
        waypoints.append(Pose2(x, y, theta))
    length = sum(
        math.hypot(b.x - a.x, b.y - a.y) for a, b in zip(waypoints, waypoints[1:])
    )
    return PlanPath(tuple(waypoints), length)


# ---------------------------------------------------------------------------
# Path following (rotate-then-drive unicycle controller)


HEADING_TOL = math.radians(5.0)
STALL_DISTANCE = 1e-3
STALL_TIME = 5.0


@dataclass
class PathFollower:
    """Feeds (v, w) commands that track a planned path.

    Rotate in place toward the next waypoint until the heading error drops
    below 5 degrees, then drive at v_max with proportional heading
    correction. A waypoint counts as reached within half a cell.
    """

    path: PlanPath
    resolution: float
    v_max: float = 0.5
    w_max: float = 1.5
    heading_gain: float = 2.0
    _idx: int = 1
    _done: bool = False
    _stall_clock: float = 0.0
    _last_pose: Pose2 | None = None

    @property
    def done(self) -> bool:
        return self._done

    def command(self, pose: Pose2, dt: float):
        """Next (v, w) for the current pose; returns None when finished.

        Raises Stuck (via `stalled`) only through the caller checking
        `update_progress`; the command itself is side-effect free on the
        world.
        """
        if self._done:
            return None
        tol = 0.5 * self.resolution
        wps = self.path.waypoints
        while self._idx < len(wps):
            wp = wps[self._idx]
            if math.hypot(wp.x - pose.x, wp.y - pose.y) <= tol:
                self._idx += 1
            else:
                break
        if self._idx >= len(wps):
            # Align with the final heading, then stop.
            err = _ang_err(wps[-1].theta, pose.theta)
            if abs(err) <= HEADING_TOL:
                self._done = True
                return None
            return 0.0, _clamp(self.heading_gain * err, self.w_max)
        wp = wps[self._idx]
        bearing = math.atan2(wp.y - pose.y, wp.x - pose.x)
        err = _ang_err(bearing, pose.theta)
        if abs(err) > HEADING_TOL:
            return 0.0, _clamp(self.heading_gain * err, self.w_max)
        dist = math.hypot(wp.x - pose.x, wp.y - pose.y)
        v = min(self.v_max, dist / dt) if dt > 0 else self.v_max
        return v, _clamp(self.heading_gain * err, self.w_max)

    def update_progress(self, pose: Pose2, dt: float) -> bool:
        """Track progress; returns True when stalled for the stall window."""
        if self._last_pose is not None:
            moved = math.hypot(pose.x - self._last_pose.x, pose.y - self._last_pose.y)
            turned = abs(_ang_err(pose.theta, self._last_pose.theta))
            if moved < STALL_DISTANCE and turned < 1e-6:
                self._stall_clock += dt
            else:
                self._stall_clock = 0.0
        self._last_pose = pose
        return self._stall_clock >= STALL_TIME


def _ang_err(target: float, current: float) -> float:
    from .geometry import wrap_angle

    return wrap_angle(target - current)


def _clamp(v: float, limit: float) -> float:
    return max(-limit, min(limit, v))


def follow(path: PlanPath, pose: Pose2, v_max: float, w_max: float, dt: float,
           resolution: float, max_steps: int = 100000):
    """Open-loop rollout of the follower with exact unicycle integration.

    Returns the list of (v, w) commands that take `pose` along `path`.
    """
    from .motion import unicycle_step

    follower = PathFollower(path, resolution, v_max=v_max, w_max=w_max)
    commands = []
    for _ in range(max_steps):
        cmd = follower.command(pose, dt)
        if cmd is None:
            break
        commands.append(cmd)
        pose = unicycle_step(pose, cmd[0], cmd[1], dt)
    return commands


# ---------------------------------------------------------------------------
# PGM map I/O (map-server convention)


def load_pgm(pgm_path, meta_path) -> OccupancyGrid:
    """Load a P5 8-bit PGM with a YAML sidecar (resolution, origin).

    Pixel value >= 250 is free, <= 50 occupied, anything else unknown.
    PGM row 0 is the top of the image = the highest y row of the map.
    """
    raw = FilePath(pgm_path).read_bytes()
    tokens = _pgm_tokens(raw)
    if tokens[0] != b"P5":
        raise ValueError("only binary P5 PGM supported")
    width, height, maxval = int(tokens[1]), int(tokens[2]), int(tokens[3])
    if maxval > 255:
        raise ValueError("only 8-bit PGM supported")
    data = raw[tokens[4]:tokens[4] + width * height]
    img = np.frombuffer(data, dtype=np.uint8).reshape(height, width)
    cells = np.full(img.shape, UNKNOWN, dtype=np.uint8)
    cells[img >= 250] = FREE
    cells[img <= 50] = OCCUPIED
    cells = cells[::-1].copy()  # image top row = max map y

    meta = yaml.safe_load(FilePath(meta_path).read_text())
    origin = meta.get("origin", [0.0, 0.0, 0.0])
    return OccupancyGrid(
        float(meta["resolution"]),
        Pose2(float(origin[0]), float(origin[1]), float(origin[2]) if len(origin) > 2 else 0.0),
        cells,
    )


def save_pgm(grid: OccupancyGrid, pgm_path, meta_path) -> None:
    img = np.full(grid.cells.shape, 205, dtype=np.uint8)
    img[grid.cells == FREE] = 254
    img[grid.cells == OCCUPIED] = 0
    img = img[::-1]
    header = f"P5\n{grid.width} {grid.height}\n255\n".encode()
    FilePath(pgm_path).write_bytes(header + img.tobytes())
    FilePath(meta_path).write_text(
        yaml.safe_dump(
            {
                "image": FilePath(pgm_path).name,
                "resolution": grid.resolution,
                "origin": [grid.origin.x, grid.origin.y, grid.origin.theta],
            },
            sort_keys=True,
        )
    )


def pgm_bytes(grid: OccupancyGrid) -> bytes:
    """In-memory PGM encoding, used for the wire protocol map transfer."""
    img = np.full(grid.cells.shape, 205, dtype=np.uint8)
    img[grid.cells == FREE] = 254
    img[grid.cells == OCCUPIED] = 0
    img = img[::-1]
    return f"P5\n{grid.width} {grid.height}\n255\n".encode() + img.tobytes()


def _pgm_tokens(raw: bytes):
    """First 4 header tokens of a PGM plus the data offset."""
    tokens = []
    i = 0
    while len(tokens) < 4:
        while i < len(raw) and raw[i:i + 1].isspace():
            i += 1
        if raw[i:i + 1] == b"#":
            while i < len(raw) and raw[i] != 0x0A:
                i += 1
            continue
        j = i
        while j < len(raw) and not raw[j:j + 1].isspace():
            j += 1
        tokens.append(raw[i:j])
        i = j
    return tokens + [i + 1]


def parse_inline_grid(rows, resolution: float, origin=(0.0, 0.0, 0.0)) -> OccupancyGrid:
    """Build a grid from text rows: '.' free, '#' occupied, '?' unknown.

    The first row is the top of the map (highest y), matching how the rows
    read in a scenario file.
    """
    lut = {".": FREE, "#": OCCUPIED, "?": UNKNOWN}
    cells = np.array([[lut[ch] for ch in row] for row in rows], dtype=np.uint8)[::-1]
    return OccupancyGrid(float(resolution), Pose2(*origin), cells)
