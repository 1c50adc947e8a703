"""Max-flow action policies over pruned reachability graphs.

For each consecutive level pair a bipartite network is solved: the super-source
feeds every cell of level ``t`` with its current integer mass, graph edges carry
unbounded flow, and every cell of level ``t + 1`` drains into the super-sink
through an equal capacity ``ceil(M / |L_{t+1}|)``. A maximum flow therefore
spreads the mass as evenly over the next level as the graph allows. Flows are
converted to per-cell action probabilities, and the masses they induce on the
next level seed the following solve.
"""
from __future__ import annotations

import hashlib
import json
from dataclasses import dataclass, field
from functools import lru_cache
from pathlib import Path

import numpy as np

from .env import DEFAULT_FOOTPRINT_RADIUS, GridGeometry, LocalPerception, empty_perception
from .levelsets import (
    DiscretizationSpec,
    GridCell,
    Level,
    ReachabilityGraph,
    SafeLevelSets,
    build_reachability_graph,
    cell_to_key,
    key_to_cell,
    prune_inevitable_collisions,
)
from .maxflow import INF_CAPACITY, FlowResult, balanced_transport, max_flow_arrays

DEFAULT_UNIT = 10**6


@dataclass
class FlowNetwork:
    """Single level-pair network. Node 0 is the source and node 1 the sink.

    Arcs are laid out as: source arcs (one per level-``t`` cell), graph arcs
    (one per distinct cell pair; parallel actions share an arc), sink arcs (one
    per level-``t + 1`` cell).
    """

    level: int
    n_src: int
    n_dst: int
    tail: np.ndarray
    head: np.ndarray
    cap: np.ndarray
    pair_src: np.ndarray  # graph arc -> source-level cell index
    pair_dst: np.ndarray  # graph arc -> target-level cell index
    edge_arc: np.ndarray  # graph edge (t, cell, action) -> graph arc index
    source: int = 0
    sink: int = 1

    @property
    def n_nodes(self) -> int:
        return 2 + self.n_src + self.n_dst

    @property
    def n_pairs(self) -> int:
        return len(self.pair_src)

    @property
    def graph_arcs(self) -> slice:
        return slice(self.n_src, self.n_src + self.n_pairs)

    @property
    def sink_capacity(self) -> int:
        return int(self.cap[-1]) if self.n_dst else 0

    def pair_actions(self, g: ReachabilityGraph) -> list[np.ndarray]:
        e = g.edges[self.level]
        return [e.action[self.edge_arc == k] for k in range(self.n_pairs)]


def build_flow_network(g: ReachabilityGraph, t: int, masses: np.ndarray) -> FlowNetwork:
    """Network between level ``t`` (carrying integer ``masses``) and level ``t + 1``."""
    n_src, n_dst = len(g.levels[t]), len(g.levels[t + 1])
    if n_src == 0 or n_dst == 0:
        raise ValueError(f"level pair ({t}, {t + 1}) has an empty level")
    masses = np.asarray(masses, dtype=np.int64)
    e = g.edges[t]
    pair = e.src * n_dst + e.dst
    _, first, inv = np.unique(pair, return_index=True, return_inverse=True)
    order = np.argsort(first, kind="stable")
    rank = np.empty_like(order)
    rank[order] = np.arange(len(order))
    edge_arc = rank[inv.reshape(-1)]
    pair_src = e.src[first[order]]
    pair_dst = e.dst[first[order]]

    total = int(masses.sum())
    sink_cap = -(-total // n_dst)
    src_nodes = 2 + np.arange(n_src)
    dst_nodes = 2 + n_src + np.arange(n_dst)
    tail = np.concatenate([np.zeros(n_src, dtype=np.int64), src_nodes[pair_src], dst_nodes])
    head = np.concatenate([src_nodes, dst_nodes[pair_dst], np.ones(n_dst, dtype=np.int64)])
    cap = np.concatenate(
        [masses, np.full(len(pair_src), INF_CAPACITY, dtype=np.int64), np.full(n_dst, sink_cap, dtype=np.int64)]
    )
    return FlowNetwork(t, n_src, n_dst, tail, head, cap, pair_src, pair_dst, edge_arc)


def max_flow(net: FlowNetwork) -> FlowResult:
    return max_flow_arrays(net.n_nodes, net.tail, net.head, net.cap, net.source, net.sink)


def solve_level_pair(net: FlowNetwork, balance: bool = True) -> np.ndarray:
    """Flow (in mass units) on each graph arc of ``net``.

    With ``balance`` the single solve is refined by min-cut decomposition until
    every sub-network saturates its equal target capacities.
    """
    if not balance:
        return max_flow(net).flows[net.graph_arcs].astype(float)
    masses = net.cap[: net.n_src]
    flows, _ = balanced_transport(net.n_src, net.n_dst, net.pair_src, net.pair_dst, masses)
    return flows


def _integerize(masses: np.ndarray, total: int) -> np.ndarray:
    """Largest-remainder rounding of non-negative masses to integers summing to ``total``."""
    if masses.sum() <= 0:
        return np.zeros(len(masses), dtype=np.int64)
    scaled = masses * (total / masses.sum())
    base = np.floor(scaled).astype(np.int64)
    short = total - int(base.sum())
    if short > 0:
        frac = scaled - base
        base[np.argsort(-frac, kind="stable")[:short]] += 1
    return base


@dataclass
class LevelPolicy:
    keys: np.ndarray  # (n,) cell keys in level order
    reps: np.ndarray  # (n, 3) representative poses
    probs: np.ndarray  # (n, n_actions)
    fallback: np.ndarray  # (n,) True where the cell carried no flow

    def __post_init__(self):
        self._order = np.argsort(self.keys, kind="stable")
        self._sorted = self.keys[self._order]

    def find(self, keys: np.ndarray) -> np.ndarray:
        """Row index for each key, -1 where absent."""
        keys = np.asarray(keys, dtype=np.int64)
        if len(self._sorted) == 0:
            return np.full(keys.shape, -1, dtype=np.int64)
        pos = np.clip(np.searchsorted(self._sorted, keys), 0, len(self._sorted) - 1)
        hit = self._sorted[pos] == keys
        return np.where(hit, self._order[pos], -1)


@dataclass
class FlowPolicy:
    spec: DiscretizationSpec
    levels: list[LevelPolicy]
    marginals: list[np.ndarray]  # flow-induced mass per cell, levels 0..N
    map_hash: str = ""
    flow_values: list[int] = field(default_factory=list)
    sink_capacities: list[int] = field(default_factory=list)
    graph: ReachabilityGraph | None = None

    @property
    def horizon(self) -> int:
        return len(self.levels)

    def distribution(self, t: int, cell: GridCell) -> np.ndarray | None:
        lv = self.levels[t]
        row = lv.find(np.array([cell_to_key(cell, self.spec)]))[0]
        return None if row < 0 else lv.probs[row]

    def to_dict(self) -> dict:
        table = {}
        for t, lv in enumerate(self.levels):
            for k, p, fb in zip(lv.keys, lv.probs, lv.fallback):
                c = key_to_cell(k, self.spec)
                table[f"({t}, {c.ix}, {c.iy}, {c.itheta})"] = {"probs": p.tolist(), "fallback": bool(fb)}
        return {
            "spec": self.spec.to_dict(),
            "map_hash": self.map_hash,
            "actions": list(self.spec.action_set),
            "policy": table,
        }

    def save(self, path: str | Path) -> None:
        Path(path).write_text(json.dumps(self.to_dict()))


def extract_level_policy(net: FlowNetwork, arc_flow: np.ndarray, g: ReachabilityGraph) -> LevelPolicy:
    """Action probabilities from per-arc flows; parallel actions split their arc evenly.

    Cells without flow fall back to uniform over their out-edges, or over all
    actions when they have none (only possible on unpruned graphs).
    """
    t = net.level
    e = g.edges[t]
    n_actions = g.spec.n_actions
    per_arc = np.bincount(net.edge_arc, minlength=net.n_pairs)
    w = arc_flow[net.edge_arc] / per_arc[net.edge_arc]
    probs = np.zeros((net.n_src, n_actions))
    np.add.at(probs, (e.src, e.action), w)
    fallback = probs.sum(axis=1) <= 0
    if fallback.any():
        fb_edge = fallback[e.src]
        np.add.at(probs, (e.src[fb_edge], e.action[fb_edge]), 1.0)
        probs[probs.sum(axis=1) <= 0] = 1.0
    probs /= np.maximum(probs.sum(axis=1, keepdims=True), 1e-300)
    lv = g.levels[t]
    return LevelPolicy(lv.keys.copy(), lv.reps.copy(), probs, fallback)


def extract_policy(g: ReachabilityGraph, unit: int = DEFAULT_UNIT, map_hash: str = "", balance: bool = True) -> FlowPolicy:
    """Sequential level-pair max-flow solves on a pruned graph."""
    if any(len(lv) == 0 for lv in g.levels):
        raise ValueError("every level must be non-empty")
    masses = _integerize(np.ones(len(g.levels[0])), unit)
    levels, marginals, values, caps = [], [masses / unit], [], []
    for t in range(g.horizon):
        net = build_flow_network(g, t, masses)
        arc_flow = solve_level_pair(net, balance)
        lp = extract_level_policy(net, arc_flow, g)
        e = g.edges[t]
        induced = np.zeros(len(g.levels[t + 1]))
        np.add.at(induced, e.dst, masses[e.src] * lp.probs[e.src, e.action])
        masses = _integerize(induced, unit)
        levels.append(lp)
        marginals.append(masses / unit)
        values.append(int(round(arc_flow.sum())))
        caps.append(net.sink_capacity)
    return FlowPolicy(g.spec, levels, marginals, map_hash, values, caps, g)


def perception_hash(perception: LocalPerception) -> str:
    h = hashlib.sha1()
    h.update(np.ascontiguousarray(perception.costmap.values).tobytes())
    h.update(np.ascontiguousarray(perception.sdf.values).tobytes())
    h.update(repr(perception.geometry).encode())
    return h.hexdigest()[:16]


def compute_cfu_policy(
    perception: LocalPerception,
    x0=(0.0, 0.0, 0.0),
    spec: DiscretizationSpec | None = None,
    footprint_radius: float = DEFAULT_FOOTPRINT_RADIUS,
    unit: int = DEFAULT_UNIT,
    balance: bool = True,
) -> tuple[SafeLevelSets, FlowPolicy]:
    spec = spec or DiscretizationSpec()
    g = build_reachability_graph(perception, x0, spec, footprint_radius)
    safe, pruned = prune_inevitable_collisions(g)
    policy = extract_policy(pruned, unit, perception_hash(perception), balance)
    return safe, policy


@lru_cache(maxsize=16)
def _cuniform(spec: DiscretizationSpec, footprint_radius: float, unit: int, resolution: float):
    geom = GridGeometry.centered(2 * spec.half_extent, resolution)
    return compute_cfu_policy(empty_perception(geom), (0.0, 0.0, 0.0), spec, footprint_radius, unit)


def compute_cuniform_policy(
    spec: DiscretizationSpec | None = None,
    footprint_radius: float = DEFAULT_FOOTPRINT_RADIUS,
    unit: int = DEFAULT_UNIT,
    resolution: float = 0.05,
) -> FlowPolicy:
    """Environment-agnostic policy: the same pipeline on an obstacle-free map (cached)."""
    return _cuniform(spec or DiscretizationSpec(), footprint_radius, unit, resolution)[1]


def cuniform_level_sets(
    spec: DiscretizationSpec | None = None, footprint_radius: float = DEFAULT_FOOTPRINT_RADIUS, resolution: float = 0.05
) -> SafeLevelSets:
    return _cuniform(spec or DiscretizationSpec(), footprint_radius, DEFAULT_UNIT, resolution)[0]


__all__ = [
    "FlowNetwork",
    "FlowPolicy",
    "LevelPolicy",
    "build_flow_network",
    "compute_cfu_policy",
    "compute_cuniform_policy",
    "cuniform_level_sets",
    "extract_level_policy",
    "extract_policy",
    "max_flow",
    "Level",
]
