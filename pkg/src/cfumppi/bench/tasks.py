"""Grid search and start/goal task selection."""
from __future__ import annotations

import heapq
import math
from dataclasses import asdict, dataclass

import numpy as np
from scipy.sparse import csr_matrix
from scipy.sparse.csgraph import dijkstra

from ..env import DEFAULT_FOOTPRINT_RADIUS, GridGeometry, OccupancyGrid, PolygonEnvironment, footprint_in_collision_many

SQRT2 = math.sqrt(2.0)
_MOVES = [(-1, -1), (-1, 0), (-1, 1), (0, -1), (0, 1), (1, -1), (1, 0), (1, 1)]


def _free_mask(grid) -> np.ndarray:
    if isinstance(grid, OccupancyGrid):
        return grid.values < 0.5
    return np.asarray(grid, dtype=bool)


def _move_ok(free: np.ndarray, r: int, c: int, dr: int, dc: int) -> bool:
    h, w = free.shape
    nr, nc = r + dr, c + dc
    if not (0 <= nr < h and 0 <= nc < w) or not free[nr, nc]:
        return False
    # no corner cutting on diagonal moves
    return dr == 0 or dc == 0 or (free[r + dr, c] and free[r, c + dc])


def octile(a, b) -> float:
    dr, dc = abs(a[0] - b[0]), abs(a[1] - b[1])
    return max(dr, dc) + (SQRT2 - 1.0) * min(dr, dc)


def a_star(grid, start, goal) -> list[tuple[int, int]]:
    """8-connected shortest path between ``(row, col)`` cells; empty if unreachable.

    ``grid`` is an :class:`OccupancyGrid` (cells >= 0.5 are blocked) or a
    boolean free mask. Step costs are 1 and sqrt(2) in cell units.
    """
    free = _free_mask(grid)
    start, goal = (int(start[0]), int(start[1])), (int(goal[0]), int(goal[1]))
    h, w = free.shape
    for r, c in (start, goal):
        if not (0 <= r < h and 0 <= c < w) or not free[r, c]:
            return []
    g = {start: 0.0}
    parent = {start: None}
    heap = [(octile(start, goal), 0.0, start)]
    closed = set()
    while heap:
        _, gc, cur = heapq.heappop(heap)
        if cur in closed:
            continue
        if cur == goal:
            path = []
            while cur is not None:
                path.append(cur)
                cur = parent[cur]
            return path[::-1]
        closed.add(cur)
        r, c = cur
        for dr, dc in _MOVES:
            if not _move_ok(free, r, c, dr, dc):
                continue
            nxt = (r + dr, c + dc)
            ng = gc + (SQRT2 if dr and dc else 1.0)
            if ng < g.get(nxt, math.inf):
                g[nxt] = ng
                parent[nxt] = cur
                heapq.heappush(heap, (ng + octile(nxt, goal), ng, nxt))
    return []


def path_length(path, resolution: float = 1.0) -> float:
    if len(path) < 2:
        return 0.0
    p = np.asarray(path, dtype=float)
    return float(np.sum(np.hypot(*np.diff(p, axis=0).T)) * resolution)


def grid_graph(grid) -> csr_matrix:
    """Sparse 8-connected graph over all cells (blocked cells stay isolated)."""
    free = _free_mask(grid)
    h, w = free.shape
    idx = np.arange(h * w).reshape(h, w)
    rows, cols, vals = [], [], []
    for dr, dc in _MOVES:
        r0, r1 = max(0, -dr), min(h, h - dr)
        c0, c1 = max(0, -dc), min(w, w - dc)
        ok = free[r0:r1, c0:c1] & free[r0 + dr : r1 + dr, c0 + dc : c1 + dc]
        if dr and dc:
            ok &= free[r0 + dr : r1 + dr, c0:c1] & free[r0:r1, c0 + dc : c1 + dc]
        src = idx[r0:r1, c0:c1][ok]
        rows.append(src)
        cols.append(src + dr * w + dc)
        vals.append(np.full(len(src), SQRT2 if dr and dc else 1.0))
    return csr_matrix((np.concatenate(vals), (np.concatenate(rows), np.concatenate(cols))), shape=(h * w, h * w))


def configuration_grid(env: PolygonEnvironment, footprint_radius: float = DEFAULT_FOOTPRINT_RADIUS, resolution: float = 0.1) -> OccupancyGrid:
    """Cells whose center cannot hold the footprint are blocked."""
    geom = GridGeometry.covering(env.bounds, resolution)
    blocked = footprint_in_collision_many(geom.cell_centers(), env, footprint_radius)
    return OccupancyGrid(geom, blocked.astype(float))


@dataclass
class NavigationTask:
    env_id: str
    index: int
    start: tuple[float, float, float]
    goal: tuple[float, float]
    path_length: float

    def to_dict(self) -> dict:
        return asdict(self)

    @property
    def task_id(self) -> str:
        return f"{self.env_id}/task{self.index}"


def _cell_center(geom: GridGeometry, cell) -> tuple[float, float]:
    r, c = cell
    return (geom.origin_x + (c + 0.5) * geom.resolution, geom.origin_y + (r + 0.5) * geom.resolution)


def _task_from_path(env_id: str, index: int, geom: GridGeometry, path) -> NavigationTask:
    sx, sy = _cell_center(geom, path[0])
    gx, gy = _cell_center(geom, path[-1])
    if len(path) > 1:
        nx, ny = _cell_center(geom, path[1])
        heading = math.atan2(ny - sy, nx - sx)
    else:
        heading = 0.0
    return NavigationTask(env_id, index, (sx, sy, heading), (gx, gy), path_length(path, geom.resolution))


def candidate_cells(cgrid: OccupancyGrid, stride: int) -> np.ndarray:
    free = _free_mask(cgrid)
    h, w = free.shape
    rr, cc = np.meshgrid(np.arange(stride // 2, h, stride), np.arange(stride // 2, w, stride), indexing="ij")
    keep = free[rr, cc]
    return np.stack([rr[keep], cc[keep]], axis=-1)


def compute_navigation_tasks(
    env: PolygonEnvironment,
    footprint_radius: float = DEFAULT_FOOTPRINT_RADIUS,
    env_id: str = "env",
    resolution: float = 0.1,
    stride: int = 5,
) -> list[NavigationTask]:
    """Two tasks between the candidate pair with the longest shortest path.

    Candidates are free cells on a lattice of ``stride`` cells; all pairwise
    path lengths come from one multi-source Dijkstra run on the same graph the
    A* search uses. The heading of each start follows its first path segment.
    """
    cgrid = configuration_grid(env, footprint_radius, resolution)
    cand = candidate_cells(cgrid, stride)
    if len(cand) < 2:
        raise ValueError("fewer than two free candidate cells")
    w = cgrid.geometry.width
    flat = cand[:, 0] * w + cand[:, 1]
    dist = dijkstra(grid_graph(cgrid), indices=flat)[:, flat]
    dist[~np.isfinite(dist)] = -1.0
    i, j = np.unravel_index(int(np.argmax(dist)), dist.shape)
    if dist[i, j] <= 0:
        raise ValueError("no connected pair of free cells")
    a, b = tuple(cand[i]), tuple(cand[j])
    fwd = a_star(cgrid, a, b)
    back = a_star(cgrid, b, a)
    return [_task_from_path(env_id, 0, cgrid.geometry, fwd), _task_from_path(env_id, 1, cgrid.geometry, back)]
