import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from cfumppi.controller import (
    Controller,
    ControllerConfig,
    CostParams,
    MppiParams,
    batch_cost,
    control_step,
    mppi_update,
    softmax_weights,
    trajectory_cost,
)
from cfumppi.dynamics import DynamicsParams, State, rollout_batch
from cfumppi.env import GridGeometry, PolygonEnvironment, oracle_local_maps
from cfumppi.samplers import PerturbationSpec, sample_perturbations

from helpers import square

CP = CostParams(check_midpoints=False)
P = DynamicsParams()


def wall_map():
    env = PolygonEnvironment((-4, -4, 4, 4), (square(2.0, -4, 3.0, 4),))
    return oracle_local_maps(env, (0.0, 0.0, 0.0), GridGeometry.centered(8.0, 0.05))


def states(*xy):
    out = np.zeros((1, len(xy), 4))
    out[0, :, :2] = xy
    return out


def test_cost_at_goal_is_zero(open_perception):
    s = states((1.0, 1.0), (1.0, 1.0), (1.0, 1.0))
    assert batch_cost(s, (1.0, 1.0), open_perception, CP)[0] == 0.0


def test_single_state_closed_form(open_perception):
    d = 1.7
    c = trajectory_cost(states((0.0, 0.0))[0], (d, 0.0), open_perception, CP)
    assert c == pytest.approx((CP.w_dist + CP.w_term) * d * d, rel=1e-12)


def test_three_steps_into_obstacle():
    lp = wall_map()
    goal = np.array([3.5, 0.0])
    traj = [(0.0, 0.0), (0.8, 0.0), (2.5, 0.0), (3.0, 0.0)]
    d0 = (3.5 - 0.0) ** 2
    d1 = (3.5 - 0.8) ** 2
    expect = CP.w_dist * (d0 + d1) + CP.P_obs
    assert batch_cost(states(*traj), goal, lp, CP)[0] == pytest.approx(expect, rel=1e-12)


def test_occupancy_term_below_threshold():
    lp = wall_map()
    cp = CostParams(check_midpoints=False, O_thresh=1.0)
    # occupancy 1.0 is not above a threshold of 1.0, so the soft term applies
    s = states((0.0, 0.0), (2.5, 0.0))
    expect = cp.w_dist * (9.0 + 0.25) + cp.occupancy_scale * 1.0 + cp.w_term * 0.25
    assert batch_cost(s, (3.0, 0.0), lp, cp)[0] == pytest.approx(expect)


def test_midpoint_check_catches_skipped_wall():
    env = PolygonEnvironment((-4, -4, 4, 4), (square(0.95, -4, 1.05, 4),))
    lp = oracle_local_maps(env, (0.0, 0.0, 0.0), GridGeometry.centered(8.0, 0.05))
    s = states((0.0, 0.0), (2.0, 0.0))
    assert batch_cost(s, (3.0, 0.0), lp, CostParams(check_midpoints=True))[0] >= 1e6
    assert batch_cost(s, (3.0, 0.0), lp, CostParams(check_midpoints=False))[0] < 1e6


@given(st.integers(0, 10_000), st.integers(1, 6))
def test_appending_after_stop_never_changes_cost(seed, extra):
    lp = _WALL
    rng = np.random.default_rng(seed)
    x = rollout_batch(np.array([0, 0, 0, 2.5]), rng.normal(0, [1, 0.3], (1, 8, 2)), P)
    base = batch_cost(x, (3.5, 0.5), lp)[0]
    coll = base >= CostParams().P_obs
    tail = np.repeat(x[:, -1:], extra, axis=1) + rng.normal(0, 1, (1, extra, 4))
    longer = batch_cost(np.concatenate([x, tail], axis=1), (3.5, 0.5), lp)[0]
    if coll:
        assert longer == base


_WALL = wall_map()


@given(st.lists(st.floats(-1e6, 1e6), min_size=1, max_size=64), st.floats(1e-3, 10), st.floats(-1e3, 1e3))
def test_softmax_identities(costs, lam, shift):
    c = np.array(costs)
    w = softmax_weights(c, lam)
    assert (w >= 0).all() and abs(w.sum() - 1) <= 1e-12
    assert np.allclose(softmax_weights(c + shift, lam), w, atol=1e-12)


def test_softmax_small_temperature_selects_argmin():
    rng = np.random.default_rng(0)
    for _ in range(200):
        c = rng.normal(0, 10, 50)
        w = softmax_weights(c, 1e-9)
        assert w[np.argmin(c)] == pytest.approx(1.0)


def test_equal_costs_average_the_noise():
    nominal = np.zeros((6, 2))
    mp = MppiParams(K_mppi=64)
    cp = CostParams(w_dist=0, w_term=0, occupancy_scale=0)
    updated, info = mppi_update(nominal, np.array([0, 0, 0, 1.0]), (1.0, 0.0), None, mp, cp, None, 7, P)
    _, du = sample_perturbations(nominal, PerturbationSpec("gaussian", mp.variance), 64, 7, P)
    assert np.allclose(info.weights, 1 / 64)
    assert np.allclose(updated, du.mean(axis=0))


def test_small_temperature_update_is_best_sample(open_perception):
    nominal = np.zeros((6, 2))
    mp = MppiParams(K_mppi=128, lam=1e-9)
    x = np.array([0, 0, 0, 1.0])
    updated, info = mppi_update(nominal, x, (2.0, 1.0), open_perception, mp, CostParams(), None, 3, P)
    _, du = sample_perturbations(nominal, PerturbationSpec("gaussian", mp.variance), 128, 3, P)
    costs = batch_cost(rollout_batch(x, nominal + du, P), (2.0, 1.0), open_perception, CostParams())
    assert np.allclose(updated, du[np.argmin(costs)])


def test_budget_split_and_accounting(open_perception):
    for kind, expect in [("mppi", (512, 0)), ("logmppi", (512, 0)), ("cu-mppi", (256, 256)), ("cfu-mppi", (256, 256))]:
        cfg = ControllerConfig(kind=kind, budget=512)
        assert (cfg.mppi.K_mppi, cfg.mppi.K_init) == expect
        out = Controller(cfg).step(1.0, (3.0, 0.0), open_perception, 1)
        assert out.diagnostics["rollouts"] == cfg.mppi.K_init + cfg.mppi.N_opt * cfg.mppi.K_mppi == 512
    mp = MppiParams.for_budget("cfu-mppi", 1024, N_opt=2)
    assert mp.K_init + mp.N_opt * mp.K_mppi == 1024


def test_hybrid_init_is_argmin(open_perception):
    cfg = ControllerConfig(kind="cfu-mppi", budget=256)
    out = Controller(cfg).step(2.5, (3.0, 0.5), open_perception, 4)
    d = out.diagnostics
    costs = batch_cost(d["init_samples"], (3.0, 0.5), open_perception, cfg.cost)
    assert d["init_best_cost"] == costs.min()


def test_goal_ahead_goes_straight(open_perception):
    for kind in ("mppi", "logmppi", "cu-mppi", "cfu-mppi"):
        controls = np.array(
            [Controller(ControllerConfig(kind=kind, budget=512)).step(2.5, (3.0, 0.0), open_perception, s).control for s in range(12)]
        )
        assert (controls[:, 0] >= 0).all()
        # steering averages out within one action bin of straight ahead
        assert abs(controls[:, 1].mean()) <= 0.04


def test_tiny_budget_is_reproducible(open_perception):
    mp = MppiParams(K_mppi=1, K_init=1, N_opt=1)
    a = control_step("cfu-mppi", State(0, 0, 0, 1.0), (2.0, 0.0), open_perception, 2, 5, mppi=mp)
    b = control_step("cfu-mppi", State(0, 0, 0, 1.0), (2.0, 0.0), open_perception, 2, 5, mppi=mp)
    assert np.array_equal(a.nominal, b.nominal)


def test_cfu_equals_cu_on_empty_map(open_perception):
    a = control_step("cfu-mppi", State(0, 0, 0, 2.0), (3.0, 1.0), open_perception, 256, 8)
    b = control_step("cu-mppi", State(0, 0, 0, 2.0), (3.0, 1.0), open_perception, 256, 8)
    assert np.array_equal(a.nominal, b.nominal)


def test_no_safe_horizon_degrades_to_mppi():
    ring = (square(-1, 0.4, 1, 1), square(-1, -1, 1, -0.4), square(0.4, -0.4, 1, 0.4), square(-1, -0.4, -0.4, 0.4))
    env = PolygonEnvironment((-4, -4, 4, 4), ring)
    lp = oracle_local_maps(env, (0.0, 0.0, 0.0), GridGeometry.centered(8.0, 0.05))
    out = control_step("cfu-mppi", State(0, 0, 0, 0.0), (3.0, 0.0), lp, 512, 0)
    assert out.diagnostics["degraded"] and out.diagnostics["rollouts"] == 512


def test_warm_start_shift(open_perception):
    ctrl = Controller(ControllerConfig(kind="mppi", budget=16))
    ctrl.nominal = np.arange(12, dtype=float).reshape(6, 2)
    assert ctrl._warm_start().tolist() == [[2, 3], [4, 5], [6, 7], [8, 9], [10, 11], [10, 11]]
    with pytest.raises(ValueError):
        ControllerConfig(kind="rrt")
