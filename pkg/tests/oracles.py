"""Independent reference implementations used only by tests.

These deliberately avoid the library's planner/raycast code paths so they
can serve as oracles.
"""

import heapq
import math

import numpy as np

SQRT2 = math.sqrt(2.0)
MOVES = [
    (0, 1, 1.0), (0, -1, 1.0), (1, 0, 1.0), (-1, 0, 1.0),
    (1, 1, SQRT2), (1, -1, SQRT2), (-1, 1, SQRT2), (-1, -1, SQRT2),
]


def dijkstra_cells(free: np.ndarray, start, goal):
    """Shortest 8-connected path cost in cell units, or None.

    Matches the planner's movement rules: diagonal steps may not cut an
    occupied corner.
    """
    h, w = free.shape
    dist = np.full((h, w), np.inf)
    sr, sc = start
    gr, gc = goal
    if not free[sr, sc] or not free[gr, gc]:
        return None
    dist[sr, sc] = 0.0
    heap = [(0.0, sr, sc)]
    while heap:
        d, r, c = heapq.heappop(heap)
        if (r, c) == (gr, gc):
            return d
        if d > dist[r, c] + 1e-12:
            continue
        for dr, dc, cost in MOVES:
            nr, nc = r + dr, c + dc
            if not (0 <= nr < h and 0 <= nc < w) or not free[nr, nc]:
                continue
            if dr and dc and not (free[r, nc] and free[nr, c]):
                continue
            nd = d + cost
            if nd < dist[nr, nc] - 1e-12:
                dist[nr, nc] = nd
                heapq.heappush(heap, (nd, nr, nc))
    return None


def segment_hits_cells(cells: np.ndarray, resolution: float, origin_xy, a, b,
                       samples_per_cell: int = 8) -> bool:
    """True when the a-b segment touches any non-free cell (dense sampling)."""
    ax, ay = a
    bx, by = b
    n = max(2, int(math.hypot(bx - ax, by - ay) / resolution * samples_per_cell) + 1)
    ox, oy = origin_xy
    h, w = cells.shape
    for i in range(n):
        t = i / (n - 1)
        x = ax + t * (bx - ax)
        y = ay + t * (by - ay)
        col = int(math.floor((x - ox) / resolution))
        row = int(math.floor((y - oy) / resolution))
        if not (0 <= row < h and 0 <= col < w) or cells[row, col] != 0:
            return True
    return False
