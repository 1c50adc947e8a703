import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from cfumppi.dynamics import reduced_step
from cfumppi.env import footprint_in_collision, oracle_local_maps
from cfumppi.levelsets import (
    DiscretizationSpec,
    GridCell,
    NoSafeHorizonError,
    ReachabilityGraph,
    SafeLevelSets,
    build_reachability_graph,
    cell_center,
    cell_keys,
    cell_to_key,
    discretize_state,
    key_to_cell,
    prune_inevitable_collisions,
    uniform_actions,
)

from helpers import enumerate_levels, graph_cells, graph_edges, small_cluttered_maps, square, surviving_by_dfs

SMALL = DiscretizationSpec(action_set=uniform_actions(5), horizon=3, half_extent=2.0)


def test_spec_validation():
    with pytest.raises(ValueError):
        DiscretizationSpec(cell_xy=0)
    with pytest.raises(ValueError):
        DiscretizationSpec(action_set=())
    with pytest.raises(ValueError):
        DiscretizationSpec(action_set=(0.0, 0.1))
    spec = DiscretizationSpec()
    assert spec.n_actions == 21 and spec.horizon == 6 and spec.theta_bins == 36
    assert DiscretizationSpec.from_dict(spec.to_dict()) == spec


def test_discretize_examples():
    spec = DiscretizationSpec()
    assert discretize_state((0, 0, 0), spec) == GridCell(0, 0, 0)
    assert discretize_state((0.01, -0.02, 0.03), spec) == discretize_state((-0.04, 0.04, -0.05), spec)
    with pytest.raises(ValueError):
        discretize_state((100.0, 0, 0), spec)


@given(st.floats(-3.9, 3.9), st.floats(-3.9, 3.9), st.floats(-math.pi, math.pi))
def test_cell_round_trip(x, y, th):
    spec = DiscretizationSpec()
    c = discretize_state((x, y, th), spec)
    assert discretize_state(cell_center(c, spec), spec) == c
    assert key_to_cell(cell_to_key(c, spec), spec) == c
    # theta bins partition the circle: a wrapped heading lands in the same bin
    assert discretize_state((x, y, th + 2 * math.pi), spec).itheta == c.itheta


def test_theta_bin_edges():
    spec = DiscretizationSpec(theta_bins=4)
    w = spec.cell_theta
    assert discretize_state((0, 0, 0.5 * w), spec).itheta == 0
    assert discretize_state((0, 0, 0.5 * w + 1e-9), spec).itheta == 1
    assert discretize_state((0, 0, math.pi), spec).itheta == discretize_state((0, 0, -math.pi + 1e-12), spec).itheta


def test_one_step_open_map(open_perception):
    spec = DiscretizationSpec(action_set=uniform_actions(3), horizon=1)
    g = build_reachability_graph(open_perception, (0, 0, 0), spec, 0.3)
    p = spec.dynamics()
    expect = {discretize_state(reduced_step((0, 0, 0), a, spec.v_nominal, p), spec) for a in spec.action_set}
    assert set(g.level_cells(1)) == expect
    assert len(g.levels[1]) <= 3


def test_wall_ahead_blocks_level_one(wall_ahead):
    _, lp = wall_ahead
    spec = DiscretizationSpec(horizon=3)
    g = build_reachability_graph(lp, (0, 0, 0), spec, 0.3)
    assert len(g.levels[1]) == 0
    with pytest.raises(NoSafeHorizonError):
        prune_inevitable_collisions(g)


def test_start_in_collision(wall_ahead):
    _, lp = wall_ahead
    with pytest.raises(NoSafeHorizonError):
        build_reachability_graph(lp, (1.0, 0.0, 0.0), DiscretizationSpec(), 0.3)


def _check_matches_enumeration(lp, spec):
    g = build_reachability_graph(lp, (0, 0, 0), spec, 0.3)
    levels, edges = enumerate_levels(lp, spec, 0.3)
    for t in range(spec.horizon + 1):
        got = graph_cells(g, t)
        assert list(got) == list(levels[t])
        for c in got:
            assert got[c] == levels[t][c]
    for t in range(spec.horizon):
        assert graph_edges(g, t) == edges[t]
    return g, levels, edges


def test_graph_matches_enumeration_on_cluttered_maps():
    for lp in small_cluttered_maps(6, seed=100):
        _check_matches_enumeration(lp, SMALL)


def test_graph_structure_invariants():
    for lp in small_cluttered_maps(4, seed=7):
        g = build_reachability_graph(lp, (0, 0, 0), DiscretizationSpec(horizon=4), 0.3)
        seen = set()
        for t, lv in enumerate(g.levels):
            keys = set(lv.keys.tolist())
            assert len(keys) == len(lv) and not (keys & seen)
            seen |= keys
            k, _ = cell_keys(lv.reps, g.spec)
            assert np.array_equal(k, lv.keys)
            for r in lv.reps:
                assert not footprint_in_collision(r, lp, 0.3)
        for t, e in enumerate(g.edges):
            assert e.src.max(initial=-1) < len(g.levels[t]) and e.dst.max(initial=-1) < len(g.levels[t + 1])
            if len(g.levels[t + 1]):
                assert set(e.dst.tolist()) == set(range(len(g.levels[t + 1])))


def test_open_map_pruning_removes_only_layering_dead_ends(open_perception):
    spec = DiscretizationSpec()
    g = build_reachability_graph(open_perception, (0, 0, 0), spec, 0.3)
    safe, pruned = prune_inevitable_collisions(g)
    p = spec.dynamics()
    owner = {c: t for t in range(len(g.levels)) for c in g.level_cells(t)}
    removed = 0
    for t in range(spec.horizon):
        kept = set(safe.cells(t))
        for cell, rep in zip(g.level_cells(t), g.levels[t].reps):
            if cell in kept:
                continue
            removed += 1
            # no action collides; each successor lands in a cell owned by level <= t
            # or in a level-(t + 1) cell that was itself removed
            for a in spec.action_set:
                nxt = reduced_step(rep, a, spec.v_nominal, p)
                assert not footprint_in_collision(nxt, open_perception, 0.3)
                c = discretize_state(nxt, spec)
                assert owner[c] <= t or c not in set(safe.cells(t + 1))
    assert removed < 0.01 * sum(g.level_sizes())
    assert set(safe.cells(spec.horizon)) == set(g.level_cells(spec.horizon))


def test_dead_end_corridor_pruned():
    from cfumppi.env import GridGeometry, PolygonEnvironment

    # short dead-end pocket ahead; only branches that stay inside it survive
    walls = (square(1.2, 0.45, 1.8, 0.6), square(1.2, -0.6, 1.8, -0.45), square(1.8, -0.6, 2.0, 0.6))
    env = PolygonEnvironment((-3.0, -3.0, 3.0, 3.0), walls)
    lp = oracle_local_maps(env, (0.0, 0.0, 0.0), GridGeometry.centered(6.0, 0.05))
    spec = DiscretizationSpec(action_set=uniform_actions(5), horizon=3, half_extent=3.0)
    g = build_reachability_graph(lp, (0, 0, 0), spec, 0.3)
    levels, edges = enumerate_levels(lp, spec, 0.3)
    alive = surviving_by_dfs(levels, edges)
    safe, pruned = prune_inevitable_collisions(g)
    for t in range(spec.horizon + 1):
        assert set(safe.cells(t)) == alive[t]
    assert sum(len(lv) for lv in safe.levels) < sum(len(lv) for lv in g.levels)


def test_pruned_cells_reach_last_level():
    for lp in small_cluttered_maps(6, seed=300):
        g = build_reachability_graph(lp, (0, 0, 0), SMALL, 0.3)
        try:
            safe, pruned = prune_inevitable_collisions(g)
        except NoSafeHorizonError:
            continue
        N = pruned.horizon
        succ = [{} for _ in range(N)]
        for t, e in enumerate(pruned.edges):
            for s, d in zip(e.src.tolist(), e.dst.tolist()):
                succ[t].setdefault(s, []).append(d)

        def dfs(t, i):
            return t == N or any(dfs(t + 1, j) for j in succ[t].get(i, []))

        for t in range(N + 1):
            for i in range(len(pruned.levels[t])):
                assert dfs(t, i)
                if t > 0:
                    assert i in set(pruned.edges[t - 1].dst.tolist())
        assert [len(lv) for lv in safe.levels] == pruned.level_sizes()


def test_safe_sets_round_trip(open_perception):
    g = build_reachability_graph(open_perception, (0, 0, 0), DiscretizationSpec(horizon=2), 0.3)
    safe, _ = prune_inevitable_collisions(g)
    back = SafeLevelSets.from_dict(safe.to_dict())
    assert all(np.array_equal(a.keys, b.keys) and np.array_equal(a.reps, b.reps) for a, b in zip(safe.levels, back.levels))
    assert isinstance(g, ReachabilityGraph) and g.to_dict()["edges"]
