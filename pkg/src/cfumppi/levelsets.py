"""Discretized reachability graphs and Safe Level Sets.

Cells are indexed on a lattice centered at the local-map origin: cell
``(ix, iy)`` covers ``[(ix - 1/2) c, (ix + 1/2) c)`` in x (same for y) and the
heading bin ``k`` covers ``((k - 1/2) w, (k + 1/2) w]`` modulo a full turn.
"""
from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import NamedTuple

import numpy as np

from .dynamics import DynamicsParams, normalize_angle, reduced_step_batch
from .env import DEFAULT_FOOTPRINT_RADIUS, LocalPerception, footprint_in_collision_many


class NoSafeHorizonError(RuntimeError):
    """Every action sequence from the start state collides within the horizon."""


class GridCell(NamedTuple):
    ix: int
    iy: int
    itheta: int


def uniform_actions(count: int = 21, delta_max: float = 0.4) -> tuple[float, ...]:
    if count == 1:
        return (0.0,)
    return tuple(float(a) for a in np.linspace(-delta_max, delta_max, count))


@dataclass(frozen=True)
class DiscretizationSpec:
    cell_xy: float = 0.1
    theta_bins: int = 36
    action_set: tuple[float, ...] = field(default_factory=uniform_actions)
    horizon: int = 6
    dt: float = 0.2
    v_nominal: float = 2.5
    wheelbase: float = 0.33
    half_extent: float = 4.0
    check_midpoint: bool = False

    def __post_init__(self):
        if self.cell_xy <= 0:
            raise ValueError("cell_xy must be positive")
        if self.theta_bins < 1:
            raise ValueError("theta_bins must be >= 1")
        if not self.action_set:
            raise ValueError("action_set must be non-empty")
        acts = np.asarray(self.action_set, dtype=float)
        if not np.allclose(np.sort(acts), np.sort(-acts)):
            raise ValueError("action_set must be symmetric about 0")
        object.__setattr__(self, "action_set", tuple(float(a) for a in self.action_set))

    @property
    def cell_theta(self) -> float:
        return 2.0 * math.pi / self.theta_bins

    @property
    def n_actions(self) -> int:
        return len(self.action_set)

    @property
    def half_cells(self) -> int:
        return int(math.floor(self.half_extent / self.cell_xy + 0.5))

    @property
    def side(self) -> int:
        return 2 * self.half_cells + 1

    @property
    def key_count(self) -> int:
        return self.side * self.side * self.theta_bins

    def dynamics(self, base: DynamicsParams | None = None) -> DynamicsParams:
        base = base or DynamicsParams()
        return DynamicsParams(self.wheelbase, self.dt, base.a_max, base.delta_max, base.v_min, base.v_max)

    def to_dict(self) -> dict:
        return {
            "cell_xy": self.cell_xy,
            "theta_bins": self.theta_bins,
            "action_set": list(self.action_set),
            "horizon": self.horizon,
            "dt": self.dt,
            "v_nominal": self.v_nominal,
            "wheelbase": self.wheelbase,
            "half_extent": self.half_extent,
            "check_midpoint": self.check_midpoint,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "DiscretizationSpec":
        d = dict(d)
        if "action_set" in d:
            d["action_set"] = tuple(d["action_set"])
        return cls(**d)


def discretize_batch(poses: np.ndarray, spec: DiscretizationSpec) -> tuple[np.ndarray, np.ndarray, np.ndarray, np.ndarray]:
    """Vectorized quantization; returns ``(ix, iy, itheta, valid)``."""
    poses = np.asarray(poses, dtype=float)
    ix = np.floor(poses[..., 0] / spec.cell_xy + 0.5).astype(np.int64)
    iy = np.floor(poses[..., 1] / spec.cell_xy + 0.5).astype(np.int64)
    it = np.ceil(poses[..., 2] / spec.cell_theta - 0.5).astype(np.int64) % spec.theta_bins
    h = spec.half_cells
    valid = (np.abs(ix) <= h) & (np.abs(iy) <= h) & np.isfinite(poses[..., 0]) & np.isfinite(poses[..., 1])
    return ix, iy, it, valid


def cell_keys(poses: np.ndarray, spec: DiscretizationSpec) -> tuple[np.ndarray, np.ndarray]:
    """Flat integer cell keys for ``(..., 3)`` poses; invalid entries get -1."""
    ix, iy, it, valid = discretize_batch(poses, spec)
    h = spec.half_cells
    key = ((ix + h) * spec.side + (iy + h)) * spec.theta_bins + it
    return np.where(valid, key, -1), valid


def key_to_cell(key: int, spec: DiscretizationSpec) -> GridCell:
    key = int(key)
    it = key % spec.theta_bins
    rest = key // spec.theta_bins
    iy = rest % spec.side - spec.half_cells
    ix = rest // spec.side - spec.half_cells
    return GridCell(ix, iy, it)


def cell_to_key(cell: GridCell, spec: DiscretizationSpec) -> int:
    h = spec.half_cells
    return ((cell.ix + h) * spec.side + (cell.iy + h)) * spec.theta_bins + cell.itheta % spec.theta_bins


def discretize_state(pose, spec: DiscretizationSpec) -> GridCell:
    ix, iy, it, valid = discretize_batch(np.asarray(pose, dtype=float)[None, :3], spec)
    if not valid[0]:
        raise ValueError(f"pose {tuple(pose)} lies outside the discretized region")
    return GridCell(int(ix[0]), int(iy[0]), int(it[0]))


def cell_center(cell: GridCell, spec: DiscretizationSpec) -> tuple[float, float, float]:
    th = cell.itheta * spec.cell_theta
    return (cell.ix * spec.cell_xy, cell.iy * spec.cell_xy, float(normalize_angle(th)))


@dataclass
class Level:
    keys: np.ndarray  # (n,) int64 in first-arrival order
    reps: np.ndarray  # (n, 3) representative poses

    def __len__(self) -> int:
        return len(self.keys)


@dataclass
class EdgeSet:
    src: np.ndarray  # index into level t
    action: np.ndarray  # index into the action set
    dst: np.ndarray  # index into level t + 1

    def __len__(self) -> int:
        return len(self.src)


@dataclass
class ReachabilityGraph:
    spec: DiscretizationSpec
    levels: list[Level]
    edges: list[EdgeSet]

    @property
    def horizon(self) -> int:
        return len(self.levels) - 1

    def level_cells(self, t: int) -> list[GridCell]:
        return [key_to_cell(k, self.spec) for k in self.levels[t].keys]

    def level_sizes(self) -> list[int]:
        return [len(lv) for lv in self.levels]

    def to_dict(self) -> dict:
        return {
            "spec": self.spec.to_dict(),
            "levels": [
                {"cells": [list(key_to_cell(k, self.spec)) for k in lv.keys], "representatives": lv.reps.tolist()}
                for lv in self.levels
            ],
            "edges": [
                {"src": e.src.tolist(), "action": e.action.tolist(), "dst": e.dst.tolist()} for e in self.edges
            ],
        }

    def save(self, path: str | Path) -> None:
        Path(path).write_text(json.dumps(self.to_dict()))


@dataclass
class SafeLevelSets:
    spec: DiscretizationSpec
    levels: list[Level]

    def __len__(self) -> int:
        return len(self.levels)

    def cells(self, t: int) -> list[GridCell]:
        return [key_to_cell(k, self.spec) for k in self.levels[t].keys]

    def key_set(self, t: int) -> set[int]:
        return set(self.levels[t].keys.tolist())

    def to_dict(self) -> dict:
        return {
            "spec": self.spec.to_dict(),
            "levels": [
                {"cells": [list(key_to_cell(k, self.spec)) for k in lv.keys], "representatives": lv.reps.tolist()}
                for lv in self.levels
            ],
        }

    @classmethod
    def from_dict(cls, d: dict) -> "SafeLevelSets":
        spec = DiscretizationSpec.from_dict(d["spec"])
        levels = []
        for lv in d["levels"]:
            keys = np.array([cell_to_key(GridCell(*c), spec) for c in lv["cells"]], dtype=np.int64)
            levels.append(Level(keys, np.asarray(lv["representatives"], dtype=float).reshape(-1, 3)))
        return cls(spec, levels)


def _transition_blocked(starts: np.ndarray, ends: np.ndarray, perception: LocalPerception, radius: float, midpoint: bool) -> np.ndarray:
    blocked = footprint_in_collision_many(ends[:, :2], perception, radius)
    if midpoint:
        mid = 0.5 * (starts[:, :2] + ends[:, :2])
        blocked |= footprint_in_collision_many(mid, perception, radius)
    return blocked


def build_reachability_graph(
    perception: LocalPerception,
    x0=(0.0, 0.0, 0.0),
    spec: DiscretizationSpec | None = None,
    footprint_radius: float = DEFAULT_FOOTPRINT_RADIUS,
) -> ReachabilityGraph:
    """Breadth-first expansion with minimum-arrival-time layering.

    Cells are expanded from their first-arrival pose. Colliding transitions are
    dropped, as are transitions back into cells owned by an earlier level.
    """
    spec = spec or DiscretizationSpec()
    x0 = np.asarray(x0, dtype=float)[:3]
    if footprint_in_collision_many(x0[None, :2], perception, footprint_radius)[0]:
        raise NoSafeHorizonError("start pose is in collision")
    keys0, valid0 = cell_keys(x0[None], spec)
    if not valid0[0]:
        raise ValueError("start pose lies outside the discretized region")

    p = spec.dynamics()
    actions = np.asarray(spec.action_set)
    m = len(actions)
    owner = np.full(spec.key_count, -1, dtype=np.int32)
    owner[keys0[0]] = 0
    levels = [Level(keys0.astype(np.int64), x0[None].copy())]
    edges: list[EdgeSet] = []

    for t in range(spec.horizon):
        cur = levels[-1]
        n = len(cur)
        if n == 0:
            levels.append(Level(np.zeros(0, dtype=np.int64), np.zeros((0, 3))))
            edges.append(EdgeSet(*(np.zeros(0, dtype=np.int64) for _ in range(3))))
            continue
        starts = np.repeat(cur.reps, m, axis=0)
        succ = reduced_step_batch(starts, np.tile(actions, n), spec.v_nominal, p)
        keys, valid = cell_keys(succ, spec)
        ok = valid & ~_transition_blocked(starts, succ, perception, footprint_radius, spec.check_midpoint)
        prev_owner = np.where(ok, owner[np.where(ok, keys, 0)], -1)
        ok &= (prev_owner < 0) | (prev_owner == t + 1)
        idx = np.flatnonzero(ok)
        k_ok = keys[idx]
        uniq, first, inv = np.unique(k_ok, return_index=True, return_inverse=True)
        order = np.argsort(first, kind="stable")
        rank = np.empty_like(order)
        rank[order] = np.arange(len(order))
        new_keys = uniq[order].astype(np.int64)
        owner[new_keys] = t + 1
        levels.append(Level(new_keys, succ[idx[first[order]]]))
        edges.append(EdgeSet(idx // m, idx % m, rank[inv]))
    return ReachabilityGraph(spec, levels, edges)


def prune_inevitable_collisions(g: ReachabilityGraph) -> tuple[SafeLevelSets, ReachabilityGraph]:
    """Drop cells that cannot reach the last level, then re-index the graph."""
    N = g.horizon
    alive = [np.ones(len(lv), dtype=bool) for lv in g.levels]
    for t in range(N - 1, -1, -1):
        e = g.edges[t]
        has_out = np.zeros(len(g.levels[t]), dtype=bool)
        live_edge = alive[t + 1][e.dst]
        has_out[e.src[live_edge]] = True
        alive[t] &= has_out
    if len(g.levels[0]) == 0 or not alive[0].all():
        raise NoSafeHorizonError("no collision-free action sequence spans the horizon")
    for t in range(N):
        e = g.edges[t]
        reached = np.zeros(len(g.levels[t + 1]), dtype=bool)
        live_edge = alive[t][e.src]
        reached[e.dst[live_edge]] = True
        alive[t + 1] &= reached

    levels, edges = [], []
    remap = []
    for t, lv in enumerate(g.levels):
        keep = alive[t]
        new_index = np.full(len(lv), -1, dtype=np.int64)
        new_index[keep] = np.arange(int(keep.sum()))
        remap.append(new_index)
        levels.append(Level(lv.keys[keep], lv.reps[keep]))
    for t, e in enumerate(g.edges):
        s, d = remap[t][e.src], remap[t + 1][e.dst]
        keep = (s >= 0) & (d >= 0)
        edges.append(EdgeSet(s[keep], e.action[keep], d[keep]))
    pruned = ReachabilityGraph(g.spec, levels, edges)
    return SafeLevelSets(g.spec, [Level(lv.keys.copy(), lv.reps.copy()) for lv in levels]), pruned
