import math

import numpy as np
import pytest
from scipy.sparse import lil_matrix
from scipy.sparse.csgraph import dijkstra

from cfumppi.bench.config import ExperimentConfig, stable_seed
from cfumppi.bench.experiments import (
    ResultTable,
    batch_successes,
    navigation_summary,
    paired_bootstrap_ci,
    run_episode,
    run_single_frame,
    run_uniformity,
)
from cfumppi.bench.tasks import (
    NavigationTask,
    a_star,
    candidate_cells,
    compute_navigation_tasks,
    configuration_grid,
    path_length,
)
from cfumppi.env import PolygonEnvironment, generate_cluttered_environment
from cfumppi.samplers import TrajectoryBatch

from helpers import square


def dijkstra_oracle(free, start, goal):
    h, w = free.shape
    g = lil_matrix((h * w, h * w))
    for r in range(h):
        for c in range(w):
            if not free[r, c]:
                continue
            for dr in (-1, 0, 1):
                for dc in (-1, 0, 1):
                    nr, nc = r + dr, c + dc
                    if (dr or dc) and 0 <= nr < h and 0 <= nc < w and free[nr, nc]:
                        if dr and dc and not (free[r + dr, c] and free[r, c + dc]):
                            continue
                        g[r * w + c, nr * w + nc] = math.hypot(dr, dc)
    d = dijkstra(g.tocsr(), indices=start[0] * w + start[1])
    return d[goal[0] * w + goal[1]]


def test_a_star_examples():
    free = np.ones((10, 10), dtype=bool)
    assert a_star(free, (3, 3), (3, 3)) == [(3, 3)]
    path = a_star(free, (0, 0), (0, 9))
    assert path_length(path) == 9.0
    walled = free.copy()
    walled[:, 5] = False
    assert a_star(walled, (0, 0), (0, 9)) == []


def test_a_star_matches_dijkstra():
    rng = np.random.default_rng(0)
    for _ in range(30):
        free = rng.random((15, 15)) > 0.25
        cells = np.argwhere(free)
        s, g = (tuple(cells[i]) for i in rng.choice(len(cells), 2, replace=False))
        path = a_star(free, s, g)
        expect = dijkstra_oracle(free, s, g)
        if np.isinf(expect):
            assert path == []
        else:
            assert path_length(path) == pytest.approx(expect, abs=1e-9)
            assert path[0] == s and path[-1] == g
            assert all(free[p] for p in path)


def test_tasks_in_empty_square():
    env = PolygonEnvironment((0, 0, 6, 6))
    t0, t1 = compute_navigation_tasks(env, 0.3)
    assert t0.start[:2] == t1.goal and t1.start[:2] == t0.goal
    assert t0.path_length == pytest.approx(t1.path_length)
    corners = np.array([[0, 0], [6, 0], [0, 6], [6, 6]])
    for p in (t0.start[:2], t0.goal):
        assert np.min(np.linalg.norm(corners - np.array(p), axis=1)) < 1.5
    assert abs(t0.goal[0] - t0.start[0]) > 4 and abs(t0.goal[1] - t0.start[1]) > 4


def test_task_pair_is_longest():
    env = generate_cluttered_environment(12)
    t0, t1 = compute_navigation_tasks(env, 0.3, "e")
    assert t0.task_id == "e/task0" and t1.start[:2] == t0.goal
    cgrid = configuration_grid(env, 0.3)
    free = cgrid.values < 0.5
    rng = np.random.default_rng(1)
    cand = candidate_cells(cgrid, 5)
    all_free = np.argwhere(free)
    # lattice candidates: exact; arbitrary free cells: within the lattice spacing at both ends
    slack = 2 * 5 * math.sqrt(2) * cgrid.geometry.resolution
    for pool, tol in ((cand, 1e-9), (all_free, slack)):
        for _ in range(1000 if pool is cand else 200):
            i, j = rng.choice(len(pool), 2, replace=False)
            path = a_star(free, tuple(pool[i]), tuple(pool[j]))
            if path:
                assert path_length(path, cgrid.geometry.resolution) <= t0.path_length + tol


def test_stable_seed():
    assert stable_seed("a", 1) == stable_seed("a", 1)
    assert stable_seed("a", 1) != stable_seed("a", 2)
    assert 0 <= stable_seed("x") < 2**63
    cfg = ExperimentConfig(name="n", master_seed=3)
    assert cfg.seed("k") == stable_seed("n", 3, "k")


def test_config_round_trip(tmp_path):
    cfg = ExperimentConfig(name="t", env_count=2, budgets=[64, 128])
    cfg.save(tmp_path / "c.json")
    assert ExperimentConfig.load(tmp_path / "c.json") == cfg
    with pytest.raises(ValueError):
        ExperimentConfig.from_dict({"bogus": 1})
    with pytest.raises(ValueError):
        ExperimentConfig(perception="camera")


def test_batch_successes_nested():
    states = np.zeros((6, 2, 4))
    states[:, 1, 0] = [5, 5, 1.0, 5, 1.1, 5]
    batch = TrajectoryBatch(states, np.zeros((6, 1, 2)), np.array([0, 0, 1, 0, 0, 0], bool), np.array([-1, -1, 1, -1, -1, -1]))
    # the first trajectory ending at the goal collided; the next one succeeds
    assert batch_successes(batch, (1.0, 0.0), 0.3, [1, 4, 5, 6]) == [False, False, True, True]


def test_episode_starting_at_goal():
    env = PolygonEnvironment((0, 0, 5, 5))
    cfg = ExperimentConfig(env_count=0)
    task = NavigationTask("e", 0, (2.0, 2.0, 0.0), (2.1, 2.0), 0.1)
    res = run_episode(env, task, "cfu-mppi", 64, 0, cfg)
    assert res.outcome == "success" and res.path_length == 0.0 and res.steps == 0


def test_episode_outcomes_counted():
    env = PolygonEnvironment((0, 0, 6, 3), (square(2.5, 0, 3.0, 2.2),))
    cfg = ExperimentConfig(env_count=0, step_cap_factor=1.0)
    task = NavigationTask("e", 0, (1.0, 1.0, 0.0), (5.0, 1.0), 4.0)
    table = ResultTable(["task", "controller", "budget", "outcome", "path_length"])
    for kind in ("mppi", "cfu-mppi"):
        r = run_episode(env, task, kind, 64, 1, cfg)
        table.add(task=r.task_id, controller=kind, budget=64, outcome=r.outcome, path_length=r.path_length)
        assert r.outcome in ("success", "collision", "timeout")
    summary = navigation_summary(table)
    for v in summary.values():
        assert v["success"] + v["collision"] + v["timeout"] == v["trials"]


def test_single_frame_and_uniformity_small():
    cfg = ExperimentConfig(env_count=1, env_seed_offset=2, poses_per_env=1, trials_per_map=2, budgets=[16, 64], uniformity_budget=64)
    sf = run_single_frame(cfg)
    assert len(sf.rows) == 2 * 4 * 2
    for kind in cfg.samplers:
        for trial in range(2):
            rows = sf.where(sampler=kind, trial=trial)
            assert [r["budget"] for r in rows] == [16, 64]
            assert rows[0]["success"] <= rows[1]["success"]
    un = run_uniformity(cfg)
    assert {r["sampler"] for r in un.rows} == set(cfg.samplers)
    for r in un.rows:
        kls = [float(x) for x in r["kl_levels"].split(";")]
        assert r["avg_kl"] == pytest.approx(np.nanmean(kls))


def test_paired_bootstrap():
    lo, hi = paired_bootstrap_ci(np.full(20, 2.0))
    assert lo == hi == 2.0
    lo, hi = paired_bootstrap_ci(np.random.default_rng(0).normal(1.0, 0.1, 200))
    assert lo < 1.0 < hi
