"""Dinic's blocking-flow max-flow on integer capacities.

Arcs are processed in insertion order, so for a given network the returned
flow is fully deterministic.
"""
from __future__ import annotations

from dataclasses import dataclass

import numba
import numpy as np

INF_CAPACITY = np.iinfo(np.int64).max // 4


@numba.njit(cache=True)
def _dinic(n_nodes, tail, head, cap, source, sink):
    m = tail.shape[0]
    # residual arcs: 2e forward, 2e + 1 backward
    to = np.empty(2 * m, dtype=np.int64)
    res = np.empty(2 * m, dtype=np.int64)
    deg = np.zeros(n_nodes + 1, dtype=np.int64)
    for e in range(m):
        to[2 * e] = head[e]
        to[2 * e + 1] = tail[e]
        res[2 * e] = cap[e]
        res[2 * e + 1] = 0
        deg[tail[e] + 1] += 1
        deg[head[e] + 1] += 1
    start = np.cumsum(deg)
    adj = np.empty(2 * m, dtype=np.int64)
    fill = start[:-1].copy()
    for e in range(m):
        adj[fill[tail[e]]] = 2 * e
        fill[tail[e]] += 1
        adj[fill[head[e]]] = 2 * e + 1
        fill[head[e]] += 1

    level = np.empty(n_nodes, dtype=np.int64)
    it = np.empty(n_nodes, dtype=np.int64)
    queue = np.empty(n_nodes, dtype=np.int64)
    path = np.empty(n_nodes, dtype=np.int64)
    total = 0
    if source == sink:
        return total, res
    while True:
        level[:] = -1
        level[source] = 0
        qh, qt = 0, 0
        queue[qt] = source
        qt += 1
        while qh < qt:
            u = queue[qh]
            qh += 1
            for k in range(start[u], start[u + 1]):
                a = adj[k]
                if res[a] > 0 and level[to[a]] < 0:
                    level[to[a]] = level[u] + 1
                    queue[qt] = to[a]
                    qt += 1
        if level[sink] < 0:
            break
        for u in range(n_nodes):
            it[u] = start[u]
        # blocking flow by repeated DFS with current-arc pointers
        depth = 0
        u = source
        while True:
            if u == sink:
                push = res[path[0]]
                for i in range(1, depth):
                    if res[path[i]] < push:
                        push = res[path[i]]
                cut = depth
                for i in range(depth):
                    a = path[i]
                    res[a] -= push
                    res[a ^ 1] += push
                    if res[a] == 0 and cut == depth:
                        cut = i
                total += push
                depth = cut
                u = source if cut == 0 else to[path[cut - 1]]
                continue
            advanced = False
            while it[u] < start[u + 1]:
                a = adj[it[u]]
                v = to[a]
                if res[a] > 0 and level[v] == level[u] + 1:
                    path[depth] = a
                    depth += 1
                    u = v
                    advanced = True
                    break
                it[u] += 1
            if advanced:
                continue
            if u == source:
                break
            level[u] = -1
            depth -= 1
            u = to[path[depth] ^ 1]
            it[u] += 1
    return total, res


@numba.njit(cache=True)
def _residual_reach(n_nodes, tail, head, res, source):
    """Nodes reachable from ``source`` in the residual graph (source side of a min cut)."""
    m = tail.shape[0]
    deg = np.zeros(n_nodes + 1, dtype=np.int64)
    for e in range(m):
        deg[tail[e] + 1] += 1
        deg[head[e] + 1] += 1
    start = np.cumsum(deg)
    adj = np.empty(2 * m, dtype=np.int64)
    to = np.empty(2 * m, dtype=np.int64)
    fill = start[:-1].copy()
    for e in range(m):
        adj[fill[tail[e]]] = 2 * e
        to[2 * e] = head[e]
        fill[tail[e]] += 1
        adj[fill[head[e]]] = 2 * e + 1
        to[2 * e + 1] = tail[e]
        fill[head[e]] += 1
    seen = np.zeros(n_nodes, dtype=np.bool_)
    stack = np.empty(n_nodes, dtype=np.int64)
    seen[source] = True
    stack[0] = source
    top = 1
    while top > 0:
        top -= 1
        u = stack[top]
        for k in range(start[u], start[u + 1]):
            a = adj[k]
            v = to[a]
            if res[a] > 0 and not seen[v]:
                seen[v] = True
                stack[top] = v
                top += 1
    return seen


@numba.njit(cache=True)
def _balanced_transport(n_src, n_dst, arc_src, arc_dst, masses):
    """Spread source masses over targets as evenly as the bipartite arcs allow.

    Each sub-problem is a max-flow with equal target capacities equal to its
    average load. If that saturates, the sub-problem is balanced; otherwise the
    residual min cut separates an over-supplied part from an under-supplied
    part and both are solved again independently.
    Returns per-arc flow (float, in mass units) and the number of solves.
    """
    arc_flow = np.zeros(arc_src.shape[0])
    sidx = np.full(n_src, -1, dtype=np.int64)
    didx = np.full(n_dst, -1, dtype=np.int64)
    keep = masses[arc_src] > 0
    pending = [(np.nonzero(masses > 0)[0], np.arange(n_dst), np.nonzero(keep)[0])]
    solves = 0
    while len(pending) > 0:
        srcs, dsts, arcs = pending.pop()
        nS, nD, nA = srcs.shape[0], dsts.shape[0], arcs.shape[0]
        tot = 0
        for q in range(nS):
            tot += masses[srcs[q]]
        if nD == 0 or tot == 0:
            continue
        for q in range(nS):
            sidx[srcs[q]] = q
        for q in range(nD):
            didx[dsts[q]] = q
        m = nS + nA + nD
        tail = np.empty(m, dtype=np.int64)
        head = np.empty(m, dtype=np.int64)
        cap = np.empty(m, dtype=np.int64)
        for q in range(nS):
            tail[q] = 0
            head[q] = 2 + q
            cap[q] = masses[srcs[q]] * nD
        for q in range(nA):
            a = arcs[q]
            tail[nS + q] = 2 + sidx[arc_src[a]]
            head[nS + q] = 2 + nS + didx[arc_dst[a]]
            cap[nS + q] = INF_CAPACITY
        for q in range(nD):
            tail[nS + nA + q] = 2 + nS + q
            head[nS + nA + q] = 1
            cap[nS + nA + q] = tot
        value, res = _dinic(2 + nS + nD, tail, head, cap, 0, 1)
        solves += 1
        if value == tot * nD:
            for q in range(nA):
                arc_flow[arcs[q]] = (cap[nS + q] - res[2 * (nS + q)]) / nD
            continue
        reach = _residual_reach(2 + nS + nD, tail, head, res, 0)
        s_hi = np.array([srcs[q] for q in range(nS) if reach[2 + q]], dtype=np.int64)
        s_lo = np.array([srcs[q] for q in range(nS) if not reach[2 + q]], dtype=np.int64)
        d_hi = np.array([dsts[q] for q in range(nD) if reach[2 + nS + q]], dtype=np.int64)
        d_lo = np.array([dsts[q] for q in range(nD) if not reach[2 + nS + q]], dtype=np.int64)
        # arcs crossing the cut carry no flow; a source reached by the search
        # can only point at reached targets, so crossing arcs go low -> high
        a_hi = np.array([arcs[q] for q in range(nA) if reach[head[nS + q]] and reach[tail[nS + q]]], dtype=np.int64)
        a_lo = np.array([arcs[q] for q in range(nA) if not reach[head[nS + q]] and not reach[tail[nS + q]]], dtype=np.int64)
        pending.append((s_lo, d_lo, a_lo))
        pending.append((s_hi, d_hi, a_hi))
    return arc_flow, solves


def balanced_transport(n_src: int, n_dst: int, arc_src, arc_dst, masses) -> tuple[np.ndarray, int]:
    arc_src = np.ascontiguousarray(arc_src, dtype=np.int64)
    arc_dst = np.ascontiguousarray(arc_dst, dtype=np.int64)
    masses = np.ascontiguousarray(masses, dtype=np.int64)
    if (masses < 0).any():
        raise ValueError("masses must be non-negative")
    return _balanced_transport(int(n_src), int(n_dst), arc_src, arc_dst, masses)


@dataclass
class FlowResult:
    value: int
    flows: np.ndarray  # per-arc flow, same order as the network arcs


def max_flow_arrays(n_nodes: int, tail, head, cap, source: int, sink: int) -> FlowResult:
    tail = np.ascontiguousarray(tail, dtype=np.int64)
    head = np.ascontiguousarray(head, dtype=np.int64)
    cap = np.ascontiguousarray(cap, dtype=np.int64)
    if len(tail) == 0:
        return FlowResult(0, np.zeros(0, dtype=np.int64))
    if (cap < 0).any():
        raise ValueError("capacities must be non-negative")
    value, res = _dinic(int(n_nodes), tail, head, cap, int(source), int(sink))
    flows = cap - res[0::2]
    return FlowResult(int(value), flows)


def check_flow(n_nodes: int, tail, head, cap, source: int, sink: int, flows) -> int:
    """Validate capacity and conservation constraints; returns the flow value."""
    tail, head, cap, flows = (np.asarray(a, dtype=np.int64) for a in (tail, head, cap, flows))
    if (flows < 0).any() or (flows > cap).any():
        raise AssertionError("flow violates capacity bounds")
    balance = np.zeros(n_nodes, dtype=np.int64)
    np.add.at(balance, tail, -flows)
    np.add.at(balance, head, flows)
    internal = np.ones(n_nodes, dtype=bool)
    internal[[source, sink]] = False
    if balance[internal].any():
        raise AssertionError("flow conservation violated")
    return int(balance[sink])
