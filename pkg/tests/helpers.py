import numpy as np


def square(x0, y0, x1, y1):
    return np.array([[x0, y0], [x1, y0], [x1, y1], [x0, y1]], dtype=float)


def enumerate_levels(perception, spec, radius, x0=(0.0, 0.0, 0.0)):
    """Level sets by enumerating every action sequence up to the horizon.

    Each sequence is advanced from the representative pose of the cell its
    prefix reached, where a cell's representative is the pose of the first
    sequence (in breadth-first order) that arrived there. A cell belongs to
    the earliest level at which any collision-free sequence reaches it.
    Returns ``(levels, edges)``: per-level ordered dicts cell -> pose and per
    level sets of ``(src_cell, action, dst_cell)``.
    """
    import itertools

    from cfumppi.dynamics import reduced_step
    from cfumppi.env import footprint_in_collision
    from cfumppi.levelsets import discretize_state

    p = spec.dynamics()
    m = spec.n_actions
    c0 = discretize_state(x0, spec)
    levels = [{c0: tuple(x0)}]
    owner = {c0: 0}
    reach = {(): c0}
    edges = []
    for t in range(1, spec.horizon + 1):
        prev = levels[-1]
        rank = {c: i for i, c in enumerate(prev)}
        seqs = [s for s in itertools.product(range(m), repeat=t) if reach.get(s[:-1]) is not None]
        seqs.sort(key=lambda s: (rank[reach[s[:-1]]], s[-1]))
        level, level_edges, nxt = {}, set(), {}
        for s in seqs:
            src = reach[s[:-1]]
            pose = reduced_step(prev[src], spec.action_set[s[-1]], spec.v_nominal, p)
            try:
                c = discretize_state(pose, spec)
            except ValueError:
                nxt[s] = None
                continue
            if footprint_in_collision(pose, perception, radius) or owner.get(c, t) < t:
                nxt[s] = None
                continue
            if c not in level:
                level[c] = pose
                owner[c] = t
            level_edges.add((src, s[-1], c))
            nxt[s] = c
        reach = nxt
        levels.append(level)
        edges.append(level_edges)
    return levels, edges


def graph_cells(g, t):
    return {c: tuple(r) for c, r in zip(g.level_cells(t), g.levels[t].reps)}


def graph_edges(g, t):
    src, dst = g.level_cells(t), g.level_cells(t + 1)
    e = g.edges[t]
    return {(src[s], int(a), dst[d]) for s, a, d in zip(e.src, e.action, e.dst)}


def surviving_by_dfs(levels, edges):
    """Cells with an edge path to the last level, keeping only those reachable from level 0."""
    N = len(levels) - 1
    alive = [set() for _ in levels]
    alive[N] = set(levels[N])
    for t in range(N - 1, -1, -1):
        alive[t] = {s for s, _, d in edges[t] if d in alive[t + 1]}
    for t in range(N):
        alive[t + 1] &= {d for s, _, d in edges[t] if s in alive[t]}
    return alive


def small_cluttered_maps(count, seed=0):
    """Robot-centered oracle maps cut from random 4 x 4 m worlds."""
    from cfumppi.env import GenerationSpec, GridGeometry, generate_cluttered_environment, oracle_local_maps, sample_free_poses

    spec = GenerationSpec(bounds=(0.0, 0.0, 4.0, 4.0), obstacle_count=(2, 5), radius=(0.2, 0.6), min_clearance=0.3)
    geom = GridGeometry.centered(4.0, 0.05)
    out = []
    k = 0
    while len(out) < count:
        env = generate_cluttered_environment(seed + k, spec)
        pose = sample_free_poses(env, 1, 0.3, seed=seed + k)[0]
        out.append(oracle_local_maps(env, pose, geom))
        k += 1
    return out


def brute_min_cut(n_nodes, tail, head, cap, source, sink):
    """Minimum s-t cut capacity by enumerating every source-side node set."""
    others = [v for v in range(n_nodes) if v not in (source, sink)]
    k = len(others)
    masks = np.arange(2**k, dtype=np.int64)
    side = np.zeros((2**k, n_nodes), dtype=bool)
    for bit, v in enumerate(others):
        side[:, v] = (masks >> bit) & 1 == 1
    side[:, source] = True
    tail, head, cap = np.asarray(tail), np.asarray(head), np.asarray(cap)
    crossing = side[:, tail] & ~side[:, head]
    return int((crossing * cap[None, :]).sum(axis=1).min())


def random_network(rng, max_nodes=16, max_cap=20):
    n = int(rng.integers(2, max_nodes + 1))
    m = int(rng.integers(0, 4 * n))
    tail = rng.integers(0, n, m)
    head = rng.integers(0, n, m)
    keep = tail != head
    tail, head = tail[keep], head[keep]
    cap = rng.integers(0, max_cap + 1, len(tail))
    return n, tail, head, cap
