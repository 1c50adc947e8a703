"""Polygonal worlds, grids, signed distances and simulated LiDAR perception."""
from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from functools import cached_property
from pathlib import Path
from typing import Sequence

import numba
import numpy as np
from scipy import ndimage

DEFAULT_FOOTPRINT_RADIUS = 0.3
DEFAULT_BEAM_COUNT = 360
DEFAULT_LIDAR_RANGE = 4.0
DEFAULT_LOCAL_SIZE = 8.0
DEFAULT_LOCAL_RESOLUTION = 0.05


class CollisionError(ValueError):
    """Raised when a pose that must be free lies inside an obstacle."""


class GenerationError(RuntimeError):
    """Raised when rejection sampling exceeds its iteration cap."""


# ---------------------------------------------------------------------------
# Grids


@dataclass(frozen=True)
class GridGeometry:
    origin_x: float
    origin_y: float
    resolution: float
    width: int
    height: int

    def __post_init__(self):
        if self.resolution <= 0:
            raise ValueError("resolution must be positive")
        if self.width <= 0 or self.height <= 0:
            raise ValueError("grid must have at least one cell")

    @classmethod
    def centered(cls, size: float = DEFAULT_LOCAL_SIZE, resolution: float = DEFAULT_LOCAL_RESOLUTION) -> "GridGeometry":
        """Square grid of side ``size`` whose center is the origin of its frame."""
        n = int(round(size / resolution))
        half = 0.5 * n * resolution
        return cls(-half, -half, resolution, n, n)

    @classmethod
    def covering(cls, bounds: Sequence[float], resolution: float) -> "GridGeometry":
        xmin, ymin, xmax, ymax = bounds
        w = int(math.ceil((xmax - xmin) / resolution - 1e-9))
        h = int(math.ceil((ymax - ymin) / resolution - 1e-9))
        return cls(xmin, ymin, resolution, w, h)

    @property
    def shape(self) -> tuple[int, int]:
        return (self.height, self.width)

    @property
    def extent(self) -> tuple[float, float, float, float]:
        return (
            self.origin_x,
            self.origin_y,
            self.origin_x + self.width * self.resolution,
            self.origin_y + self.height * self.resolution,
        )

    @property
    def diagonal(self) -> float:
        return math.hypot(self.width * self.resolution, self.height * self.resolution)

    def cell_centers(self) -> np.ndarray:
        """``(height, width, 2)`` array of cell-center coordinates."""
        xs = self.origin_x + (np.arange(self.width) + 0.5) * self.resolution
        ys = self.origin_y + (np.arange(self.height) + 0.5) * self.resolution
        gx, gy = np.meshgrid(xs, ys)
        return np.stack([gx, gy], axis=-1)

    def index_of(self, points: np.ndarray) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
        """Return ``(row, col, inside)`` for ``(..., 2)`` points."""
        points = np.asarray(points, dtype=float)
        col = np.floor((points[..., 0] - self.origin_x) / self.resolution).astype(np.int64)
        row = np.floor((points[..., 1] - self.origin_y) / self.resolution).astype(np.int64)
        inside = (col >= 0) & (col < self.width) & (row >= 0) & (row < self.height)
        return row, col, inside

    def to_dict(self) -> dict:
        return {
            "origin": [self.origin_x, self.origin_y],
            "resolution": self.resolution,
            "width": self.width,
            "height": self.height,
        }


@dataclass(frozen=True, eq=False)
class OccupancyGrid:
    geometry: GridGeometry
    values: np.ndarray

    def __post_init__(self):
        vals = np.asarray(self.values, dtype=float)
        if vals.shape != self.geometry.shape:
            raise ValueError(f"values shape {vals.shape} does not match grid {self.geometry.shape}")
        if vals.size and (vals.min() < 0.0 or vals.max() > 1.0):
            raise ValueError("occupancy values must lie in [0, 1]")
        vals.setflags(write=False)
        object.__setattr__(self, "values", vals)

    def sample(self, points: np.ndarray, outside: float = 1.0) -> np.ndarray:
        """Nearest-cell lookup; points off the grid read ``outside``."""
        row, col, inside = self.geometry.index_of(points)
        out = np.full(row.shape, outside, dtype=float)
        out[inside] = self.values[row[inside], col[inside]]
        return out


@dataclass(frozen=True, eq=False)
class SdfGrid:
    geometry: GridGeometry
    values: np.ndarray

    def __post_init__(self):
        vals = np.asarray(self.values, dtype=float)
        if vals.shape != self.geometry.shape:
            raise ValueError(f"values shape {vals.shape} does not match grid {self.geometry.shape}")
        vals.setflags(write=False)
        object.__setattr__(self, "values", vals)

    def interpolate(self, points: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
        """Bilinear interpolation between cell centers.

        Returns ``(values, inside)``; values are NaN where ``inside`` is False.
        Within half a cell of the border the nearest interior values are used.
        """
        g = self.geometry
        points = np.asarray(points, dtype=float)
        fx = (points[..., 0] - g.origin_x) / g.resolution
        fy = (points[..., 1] - g.origin_y) / g.resolution
        inside = (fx >= 0) & (fx <= g.width) & (fy >= 0) & (fy <= g.height)
        fx = np.where(inside, fx, 0.5) - 0.5
        fy = np.where(inside, fy, 0.5) - 0.5
        i0 = np.clip(np.floor(fx).astype(np.int64), 0, max(g.width - 2, 0))
        j0 = np.clip(np.floor(fy).astype(np.int64), 0, max(g.height - 2, 0))
        i1 = np.minimum(i0 + 1, g.width - 1)
        j1 = np.minimum(j0 + 1, g.height - 1)
        tx = np.clip(fx - i0, 0.0, 1.0)
        ty = np.clip(fy - j0, 0.0, 1.0)
        v = self.values
        val = (
            v[j0, i0] * (1 - tx) * (1 - ty)
            + v[j0, i1] * tx * (1 - ty)
            + v[j1, i0] * (1 - tx) * ty
            + v[j1, i1] * tx * ty
        )
        return np.where(inside, val, np.nan), inside


def grid_to_csv(grid: OccupancyGrid | SdfGrid, path: str | Path) -> None:
    np.savetxt(path, grid.values, delimiter=",", fmt="%.9g")


# ---------------------------------------------------------------------------
# Polygon geometry


def _segments_intersect(p1, p2, q1, q2) -> bool:
    def orient(a, b, c):
        v = (b[0] - a[0]) * (c[1] - a[1]) - (b[1] - a[1]) * (c[0] - a[0])
        return 0 if abs(v) < 1e-12 else (1 if v > 0 else -1)

    def on_seg(a, b, c):
        return min(a[0], b[0]) - 1e-12 <= c[0] <= max(a[0], b[0]) + 1e-12 and min(a[1], b[1]) - 1e-12 <= c[1] <= max(
            a[1], b[1]
        ) + 1e-12

    o1, o2 = orient(p1, p2, q1), orient(p1, p2, q2)
    o3, o4 = orient(q1, q2, p1), orient(q1, q2, p2)
    if o1 != o2 and o3 != o4:
        return True
    if o1 == 0 and on_seg(p1, p2, q1):
        return True
    if o2 == 0 and on_seg(p1, p2, q2):
        return True
    if o3 == 0 and on_seg(q1, q2, p1):
        return True
    if o4 == 0 and on_seg(q1, q2, p2):
        return True
    return False


def polygon_is_simple(vertices: np.ndarray) -> bool:
    n = len(vertices)
    if n < 3:
        return False
    for i in range(n):
        a, b = vertices[i], vertices[(i + 1) % n]
        for j in range(i + 1, n):
            if j == i or (j + 1) % n == i or (i + 1) % n == j:
                continue
            if _segments_intersect(a, b, vertices[j], vertices[(j + 1) % n]):
                return False
    return True


def signed_area(vertices: np.ndarray) -> float:
    x, y = vertices[:, 0], vertices[:, 1]
    return 0.5 * float(np.sum(x * np.roll(y, -1) - np.roll(x, -1) * y))


def points_in_polygon(points: np.ndarray, vertices: np.ndarray) -> np.ndarray:
    """Even-odd rule test for ``(..., 2)`` points."""
    px, py = points[..., 0], points[..., 1]
    inside = np.zeros(px.shape, dtype=bool)
    xj, yj = vertices[-1]
    for xi, yi in vertices:
        cond = (yi > py) != (yj > py)
        with np.errstate(divide="ignore", invalid="ignore"):
            xint = (xj - xi) * (py - yi) / (yj - yi) + xi
        inside ^= cond & (px < xint)
        xj, yj = xi, yi
    return inside


def _segment_distances(points: np.ndarray, a: np.ndarray, b: np.ndarray, chunk: int = 4096) -> np.ndarray:
    """Minimum distance from each of ``(n, 2)`` points to any of the segments ``a[i]-b[i]``."""
    n = len(points)
    out = np.empty(n, dtype=float)
    ab = b - a
    denom = np.maximum(np.einsum("ij,ij->i", ab, ab), 1e-300)
    for s in range(0, n, chunk):
        p = points[s : s + chunk, None, :]
        ap = p - a[None]
        t = np.clip(np.einsum("nsk,sk->ns", ap, ab) / denom, 0.0, 1.0)
        d = ap - t[..., None] * ab[None]
        out[s : s + chunk] = np.sqrt(np.min(np.einsum("nsk,nsk->ns", d, d), axis=1))
    return out


@dataclass(frozen=True, eq=False)
class PolygonEnvironment:
    """Rectangular world with simple polygonal obstacles (CCW vertex order)."""

    bounds: tuple[float, float, float, float]
    obstacles: tuple[np.ndarray, ...] = field(default_factory=tuple)

    def __post_init__(self):
        xmin, ymin, xmax, ymax = (float(b) for b in self.bounds)
        if not (xmax > xmin and ymax > ymin):
            raise ValueError("bounds must have positive extent")
        polys = []
        for poly in self.obstacles:
            v = np.array(poly, dtype=float).reshape(-1, 2)
            if not polygon_is_simple(v):
                raise ValueError("obstacle polygon is not simple")
            if signed_area(v) < 0:
                v = v[::-1].copy()
            if (v[:, 0] < xmin - 1e-9).any() or (v[:, 0] > xmax + 1e-9).any() or (v[:, 1] < ymin - 1e-9).any() or (
                v[:, 1] > ymax + 1e-9
            ).any():
                raise ValueError("obstacle vertex outside bounds")
            v.setflags(write=False)
            polys.append(v)
        object.__setattr__(self, "bounds", (xmin, ymin, xmax, ymax))
        object.__setattr__(self, "obstacles", tuple(polys))

    @cached_property
    def edges(self) -> tuple[np.ndarray, np.ndarray]:
        if not self.obstacles:
            return np.zeros((0, 2)), np.zeros((0, 2))
        a = np.concatenate([p for p in self.obstacles])
        b = np.concatenate([np.roll(p, -1, axis=0) for p in self.obstacles])
        return a, b

    @cached_property
    def edge_offsets(self) -> np.ndarray:
        """Start index of each polygon's edges in :attr:`edges` (plus the total)."""
        return np.concatenate([[0], np.cumsum([len(p) for p in self.obstacles])]).astype(np.int64)

    @cached_property
    def bound_edges(self) -> tuple[np.ndarray, np.ndarray]:
        xmin, ymin, xmax, ymax = self.bounds
        c = np.array([[xmin, ymin], [xmax, ymin], [xmax, ymax], [xmin, ymax]])
        return c, np.roll(c, -1, axis=0)

    def inside_obstacle(self, points: np.ndarray) -> np.ndarray:
        points = np.asarray(points, dtype=float)
        inside = np.zeros(points.shape[:-1], dtype=bool)
        for poly in self.obstacles:
            inside |= points_in_polygon(points, poly)
        return inside

    def to_dict(self) -> dict:
        return {"bounds": list(self.bounds), "obstacles": [p.tolist() for p in self.obstacles]}

    @classmethod
    def from_dict(cls, d: dict) -> "PolygonEnvironment":
        return cls(tuple(d["bounds"]), tuple(np.asarray(p, dtype=float) for p in d.get("obstacles", [])))

    def save(self, path: str | Path) -> None:
        Path(path).write_text(json.dumps(self.to_dict(), indent=1))

    @classmethod
    def load(cls, path: str | Path) -> "PolygonEnvironment":
        return cls.from_dict(json.loads(Path(path).read_text()))


@numba.njit(cache=True)
def _signed_distance_kernel(points, a, b, offsets):
    n = points.shape[0]
    out = np.empty(n)
    for i in range(n):
        px, py = points[i, 0], points[i, 1]
        best = np.inf
        inside = False
        for k in range(offsets.shape[0] - 1):
            parity = False
            for e in range(offsets[k], offsets[k + 1]):
                ax, ay = a[e, 0], a[e, 1]
                ex, ey = b[e, 0] - ax, b[e, 1] - ay
                den = ex * ex + ey * ey
                t = 0.0
                if den > 0.0:
                    t = ((px - ax) * ex + (py - ay) * ey) / den
                    t = min(max(t, 0.0), 1.0)
                dx, dy = px - ax - t * ex, py - ay - t * ey
                d2 = dx * dx + dy * dy
                if d2 < best:
                    best = d2
                # even-odd crossing test, same convention as points_in_polygon
                if (b[e, 1] > py) != (ay > py):
                    xint = (ax - b[e, 0]) * (py - b[e, 1]) / (ay - b[e, 1]) + b[e, 0]
                    if px < xint:
                        parity = not parity
            inside = inside or parity
        d = np.sqrt(best)
        out[i] = -d if inside else d
    return out


def signed_distance_many(env: PolygonEnvironment, points: np.ndarray) -> np.ndarray:
    """Signed distance to the obstacle boundaries; ``inf`` when there are none."""
    points = np.asarray(points, dtype=float)
    shape = points.shape[:-1]
    if not env.obstacles:
        return np.full(shape, np.inf)
    a, b = env.edges
    flat = np.ascontiguousarray(points.reshape(-1, 2))
    return _signed_distance_kernel(flat, a, b, env.edge_offsets).reshape(shape)


def signed_distance(env: PolygonEnvironment, p) -> float:
    return float(signed_distance_many(env, np.asarray(p, dtype=float)[None])[0])


def clearance_many(env: PolygonEnvironment, points: np.ndarray) -> np.ndarray:
    """Signed distance treating the world bounds as walls as well."""
    points = np.asarray(points, dtype=float)
    xmin, ymin, xmax, ymax = env.bounds
    wall = np.minimum.reduce(
        [points[..., 0] - xmin, xmax - points[..., 0], points[..., 1] - ymin, ymax - points[..., 1]]
    )
    return np.minimum(signed_distance_many(env, points), wall)


def rasterize(env: PolygonEnvironment, geometry: GridGeometry) -> OccupancyGrid:
    centers = geometry.cell_centers()
    return OccupancyGrid(geometry, env.inside_obstacle(centers).astype(float))


def sdf_sentinel(geometry: GridGeometry) -> float:
    return 0.5 * geometry.diagonal


def build_sdf_grid(env: PolygonEnvironment, geometry: GridGeometry) -> SdfGrid:
    if not env.obstacles:
        return SdfGrid(geometry, np.full(geometry.shape, sdf_sentinel(geometry)))
    return SdfGrid(geometry, signed_distance_many(env, geometry.cell_centers()))


# ---------------------------------------------------------------------------
# Ray casting


def cast_rays(env: PolygonEnvironment, origin, angles: np.ndarray, max_range: float) -> np.ndarray:
    """Range to the first obstacle or bounds edge along world-frame ``angles``."""
    angles = np.asarray(angles, dtype=float)
    a0, b0 = env.edges
    a1, b1 = env.bound_edges
    a = np.concatenate([a0, a1])
    e = np.concatenate([b0, b1]) - a
    o = np.asarray(origin, dtype=float)[:2]
    d = np.stack([np.cos(angles), np.sin(angles)], axis=-1)
    ao = a - o
    denom = d[:, None, 0] * e[None, :, 1] - d[:, None, 1] * e[None, :, 0]
    with np.errstate(divide="ignore", invalid="ignore"):
        t = (ao[None, :, 0] * e[None, :, 1] - ao[None, :, 1] * e[None, :, 0]) / denom
        s = (ao[None, :, 0] * d[:, None, 1] - ao[None, :, 1] * d[:, None, 0]) / denom
    hit = (np.abs(denom) > 1e-15) & (t >= 0.0) & (s >= 0.0) & (s <= 1.0)
    t = np.where(hit, t, np.inf)
    return np.minimum(t.min(axis=1), max_range)


def cast_ray(env: PolygonEnvironment, origin, bearing: float, max_range: float) -> float:
    return float(cast_rays(env, origin, np.array([bearing]), max_range)[0])


@dataclass(frozen=True, eq=False)
class LidarScan:
    pose: tuple[float, float, float]
    bearings: np.ndarray
    ranges: np.ndarray
    max_range: float

    @property
    def beams(self) -> list[tuple[float, float]]:
        return list(zip(self.bearings.tolist(), self.ranges.tolist()))


def simulate_lidar(
    env: PolygonEnvironment, pose, beam_count: int = DEFAULT_BEAM_COUNT, max_range: float = DEFAULT_LIDAR_RANGE
) -> LidarScan:
    """360-degree scan; bearings are in the robot frame, starting at the heading."""
    x, y, th = (float(c) for c in pose)
    if clearance_many(env, np.array([x, y])) < 0:
        raise CollisionError(f"lidar pose ({x:.3f}, {y:.3f}) is in collision")
    bearings = np.arange(beam_count) * (2.0 * np.pi / beam_count)
    ranges = cast_rays(env, (x, y), th + bearings, max_range)
    return LidarScan((x, y, th), bearings, ranges, float(max_range))


# ---------------------------------------------------------------------------
# Local perception


def _disc_max_filter(values: np.ndarray, disc: np.ndarray) -> np.ndarray:
    """``maximum_filter`` with a symmetric convex footprint, done as one 1-D pass per footprint row."""
    k = disc.shape[0] // 2
    padded = np.pad(values, k, mode="constant", constant_values=0.0)
    h, w = values.shape
    out = np.zeros_like(values)
    rows = {}
    for dy in range(-k, k + 1):
        count = int(disc[dy + k].sum())
        if count == 0:
            continue
        half = count // 2
        if half not in rows:
            rows[half] = ndimage.maximum_filter1d(padded, 2 * half + 1, axis=1, mode="constant", cval=0.0)
        np.maximum(out, rows[half][k + dy : k + dy + h, k : k + w], out=out)
    return out


@dataclass(frozen=True, eq=False)
class LocalPerception:
    """Robot-centered costmap and SDF; the robot sits at the frame origin facing +x."""

    costmap: OccupancyGrid
    sdf: SdfGrid
    robot_pose_world: tuple[float, float, float] = (0.0, 0.0, 0.0)

    def __post_init__(self):
        if self.costmap.geometry != self.sdf.geometry:
            raise ValueError("costmap and sdf must share one grid geometry")

    @property
    def geometry(self) -> GridGeometry:
        return self.costmap.geometry

    @cached_property
    def _footprint_cache(self) -> dict:
        return {}

    def footprint_occupancy_map(self, radius: float) -> np.ndarray:
        """Max occupancy over cells the footprint may overlap.

        A cell counts when some point of it lies within ``radius`` of some point
        of the query cell, so the result is conservative for any position
        inside the query cell.
        """
        key = round(radius, 9)
        cache = self._footprint_cache
        if key not in cache:
            res = self.geometry.resolution
            k = int(math.ceil(radius / res)) + 1
            yy, xx = np.mgrid[-k : k + 1, -k : k + 1]
            gx = np.maximum(np.abs(xx) - 1, 0) * res
            gy = np.maximum(np.abs(yy) - 1, 0) * res
            disc = gx**2 + gy**2 <= radius * radius + 1e-12
            cache[key] = _disc_max_filter(self.costmap.values, disc)
        return cache[key]

    def footprint_occupancy(self, points: np.ndarray, radius: float) -> np.ndarray:
        fmap = self.footprint_occupancy_map(radius)
        row, col, inside = self.geometry.index_of(points)
        out = np.ones(row.shape, dtype=float)
        out[inside] = fmap[row[inside], col[inside]]
        return out

    def to_world(self, points: np.ndarray) -> np.ndarray:
        x, y, th = self.robot_pose_world
        return local_to_world(points, (x, y, th))

    def to_local(self, points: np.ndarray) -> np.ndarray:
        return world_to_local(points, self.robot_pose_world)


def local_to_world(points: np.ndarray, pose) -> np.ndarray:
    x, y, th = pose
    c, s = math.cos(th), math.sin(th)
    p = np.asarray(points, dtype=float)
    out = np.empty(p.shape, dtype=float)
    out[..., 0] = x + c * p[..., 0] - s * p[..., 1]
    out[..., 1] = y + s * p[..., 0] + c * p[..., 1]
    return out


def world_to_local(points: np.ndarray, pose) -> np.ndarray:
    x, y, th = pose
    c, s = math.cos(th), math.sin(th)
    p = np.asarray(points, dtype=float)
    dx, dy = p[..., 0] - x, p[..., 1] - y
    out = np.empty(p.shape, dtype=float)
    out[..., 0] = c * dx + s * dy
    out[..., 1] = -s * dx + c * dy
    return out


def sdf_from_occupancy(occupied: np.ndarray, geometry: GridGeometry) -> np.ndarray:
    """Exact Euclidean distance transform between cell centers, negative inside."""
    occupied = np.asarray(occupied, dtype=bool)
    if not occupied.any():
        return np.full(geometry.shape, sdf_sentinel(geometry))
    res = geometry.resolution
    outside = ndimage.distance_transform_edt(~occupied) * res
    if occupied.all():
        return np.full(geometry.shape, -sdf_sentinel(geometry))
    inside = ndimage.distance_transform_edt(occupied) * res
    return np.where(occupied, -inside, outside)


def trace_scan(scan: LidarScan, geometry: GridGeometry) -> tuple[np.ndarray, np.ndarray]:
    """Rasterize a scan into ``(occupied, observed_free)`` boolean masks.

    Hit endpoints mark their cell occupied; cells crossed by a beam before its
    endpoint are observed free unless some beam ended in them.
    """
    occupied = np.zeros(geometry.shape, dtype=bool)
    seen = np.zeros(geometry.shape, dtype=bool)
    b, r = scan.bearings, scan.ranges
    hit = r < scan.max_range
    ends = np.stack([r * np.cos(b), r * np.sin(b)], axis=-1)
    row, col, inside = geometry.index_of(ends)
    occupied[row[hit & inside], col[hit & inside]] = True

    step = 0.25 * geometry.resolution
    n = int(math.ceil(scan.max_range / step)) + 1
    s = np.arange(n) * step
    pts = s[None, :, None] * np.stack([np.cos(b), np.sin(b)], axis=-1)[:, None, :]
    prow, pcol, pin = geometry.index_of(pts)
    before = s[None, :] < r[:, None]
    # the endpoint cell itself is not "before the hit"
    not_end = (prow != row[:, None]) | (pcol != col[:, None]) | ~hit[:, None]
    mask = before & pin & not_end
    seen[prow[mask], pcol[mask]] = True
    return occupied, seen & ~occupied


def scan_to_local_maps(scan: LidarScan, geometry: GridGeometry | None = None) -> LocalPerception:
    geometry = geometry or GridGeometry.centered()
    occupied, _ = trace_scan(scan, geometry)
    costmap = OccupancyGrid(geometry, occupied.astype(float))
    sdf = SdfGrid(geometry, sdf_from_occupancy(occupied, geometry))
    return LocalPerception(costmap, sdf, tuple(scan.pose))


def oracle_local_maps(env: PolygonEnvironment, pose, geometry: GridGeometry | None = None) -> LocalPerception:
    """Ground-truth robot-centered maps cut from the world (bounds count as walls)."""
    geometry = geometry or GridGeometry.centered()
    world = local_to_world(geometry.cell_centers(), pose)
    clear = clearance_many(env, world)
    # a cell is occupied as soon as the obstacle reaches into it
    occupied = clear < 0.5 * math.sqrt(2.0) * geometry.resolution
    costmap = OccupancyGrid(geometry, occupied.astype(float))
    sdf = np.minimum(clear, sdf_sentinel(geometry))
    return LocalPerception(costmap, SdfGrid(geometry, sdf), tuple(float(c) for c in pose))


def empty_perception(geometry: GridGeometry | None = None) -> LocalPerception:
    geometry = geometry or GridGeometry.centered()
    return LocalPerception(
        OccupancyGrid(geometry, np.zeros(geometry.shape)),
        SdfGrid(geometry, np.full(geometry.shape, sdf_sentinel(geometry))),
    )


# ---------------------------------------------------------------------------
# Collision and pose sampling


def footprint_in_collision_many(points: np.ndarray, world, footprint_radius: float = DEFAULT_FOOTPRINT_RADIUS) -> np.ndarray:
    """Disc-footprint collision test for ``(..., 2)`` positions.

    ``world`` may be a :class:`SdfGrid`, :class:`LocalPerception` or
    :class:`PolygonEnvironment`. Off-grid positions (or positions whose disc
    leaves the world bounds) count as collisions.
    """
    points = np.asarray(points, dtype=float)[..., :2]
    if isinstance(world, LocalPerception):
        world = world.sdf
    if isinstance(world, SdfGrid):
        d, inside = world.interpolate(points)
        return ~inside | (np.where(inside, d, -np.inf) < footprint_radius)
    if isinstance(world, PolygonEnvironment):
        xmin, ymin, xmax, ymax = world.bounds
        r = footprint_radius
        out = (points[..., 0] < xmin + r) | (points[..., 0] > xmax - r) | (points[..., 1] < ymin + r) | (
            points[..., 1] > ymax - r
        )
        return out | (signed_distance_many(world, points) < r)
    raise TypeError(f"unsupported map type {type(world).__name__}")


def footprint_in_collision(state, world, footprint_radius: float = DEFAULT_FOOTPRINT_RADIUS) -> bool:
    if hasattr(state, "px"):
        p = np.array([state.px, state.py])
    else:
        p = np.asarray(state, dtype=float)[:2]
    return bool(footprint_in_collision_many(p[None], world, footprint_radius)[0])


def sample_free_poses(
    env: PolygonEnvironment,
    count: int,
    footprint_radius: float = DEFAULT_FOOTPRINT_RADIUS,
    seed: int = 0,
    max_draws: int = 100_000,
) -> list[tuple[float, float, float]]:
    """Uniform rejection sampling of poses whose disc footprint is obstacle free."""
    rng = np.random.default_rng(seed)
    xmin, ymin, xmax, ymax = env.bounds
    r = footprint_radius
    if xmax - xmin <= 2 * r or ymax - ymin <= 2 * r:
        raise GenerationError("world is narrower than the footprint")
    poses = []
    for _ in range(max_draws):
        if len(poses) == count:
            break
        x = rng.uniform(xmin + r, xmax - r)
        y = rng.uniform(ymin + r, ymax - r)
        th = rng.uniform(0.0, 2.0 * np.pi)
        if signed_distance(env, (x, y)) >= r:
            poses.append((float(x), float(y), float(th)))
    if len(poses) < count:
        raise GenerationError(f"only {len(poses)} of {count} free poses found in {max_draws} draws")
    return poses


# ---------------------------------------------------------------------------
# Procedural environments


@dataclass(frozen=True)
class GenerationSpec:
    bounds: tuple[float, float, float, float] = (0.0, 0.0, 10.0, 10.0)
    obstacle_count: tuple[int, int] = (8, 14)
    vertex_count: tuple[int, int] = (5, 10)
    radius: tuple[float, float] = (0.4, 1.3)
    min_clearance: float = 0.8
    footprint_radius: float = DEFAULT_FOOTPRINT_RADIUS
    max_attempts: int = 5000


def _random_star_polygon(rng: np.random.Generator, center, n: int, rmin: float, rmax: float) -> np.ndarray:
    angles = np.sort(rng.uniform(0.0, 2.0 * np.pi, n))
    # keep a minimum angular gap so spikes stay well formed
    gaps = np.diff(np.concatenate([angles, angles[:1] + 2 * np.pi]))
    if gaps.min() < 0.15:
        angles = np.linspace(0, 2 * np.pi, n, endpoint=False) + rng.uniform(0, 2 * np.pi)
        angles += rng.uniform(-0.2, 0.2, n) * (2 * np.pi / n)
    rmax_i = rng.uniform(rmin, rmax)
    radii = rng.uniform(0.35 * rmax_i, rmax_i, n)
    return np.stack([center[0] + radii * np.cos(angles), center[1] + radii * np.sin(angles)], axis=-1)


def polygons_distance(p: np.ndarray, q: np.ndarray) -> float:
    """Distance between two polygons (0 when they overlap or one contains the other)."""
    if points_in_polygon(p[:1], q)[0] or points_in_polygon(q[:1], p)[0]:
        return 0.0
    pa, pb = p, np.roll(p, -1, axis=0)
    qa, qb = q, np.roll(q, -1, axis=0)
    for i in range(len(p)):
        for j in range(len(q)):
            if _segments_intersect(pa[i], pb[i], qa[j], qb[j]):
                return 0.0
    return float(min(_segment_distances(p, qa, qb).min(), _segment_distances(q, pa, pb).min()))


def generate_cluttered_environment(seed: int, spec: GenerationSpec | None = None) -> PolygonEnvironment:
    """Random star-shaped (generally concave) obstacles placed by rejection sampling."""
    spec = spec or GenerationSpec()
    rng = np.random.default_rng(seed)
    xmin, ymin, xmax, ymax = spec.bounds
    lo, hi = spec.obstacle_count
    count = int(rng.integers(lo, hi + 1))
    placed: list[np.ndarray] = []
    attempts = 0
    while len(placed) < count:
        attempts += 1
        if attempts > spec.max_attempts:
            raise GenerationError(f"placed {len(placed)} of {count} obstacles in {spec.max_attempts} attempts")
        n = int(rng.integers(spec.vertex_count[0], spec.vertex_count[1] + 1))
        center = (rng.uniform(xmin, xmax), rng.uniform(ymin, ymax))
        poly = _random_star_polygon(rng, center, n, *spec.radius)
        if (poly[:, 0] < xmin).any() or (poly[:, 0] > xmax).any() or (poly[:, 1] < ymin).any() or (poly[:, 1] > ymax).any():
            continue
        if not polygon_is_simple(poly):
            continue
        if any(polygons_distance(poly, q) < spec.min_clearance for q in placed):
            continue
        placed.append(poly)
    env = PolygonEnvironment(spec.bounds, tuple(placed))
    if placed:
        geom = GridGeometry.covering(spec.bounds, 0.1)
        free = clearance_many(env, geom.cell_centers())
        if free.max() < 2 * spec.footprint_radius:
            raise GenerationError("no free region wide enough for the footprint")
    return env
