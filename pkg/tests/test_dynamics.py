import math

import numpy as np
from hypothesis import given
from hypothesis import strategies as st

from cfumppi.dynamics import (
    Control,
    DynamicsParams,
    State,
    clamp_control,
    clamp_controls,
    normalize_angle,
    reduced_step,
    reduced_step_batch,
    rollout,
    rollout_batch,
    step,
    step_batch,
)

P = DynamicsParams()
finite = st.floats(-50, 50, allow_nan=False)
angle = st.floats(-math.pi, math.pi, allow_nan=False)


def test_straight_line_step():
    x = step(State(0, 0, 0, 2.5), Control(0, 0), P)
    assert x == State(0.5, 0.0, 0.0, 2.5)


def test_zero_velocity_is_stationary():
    x0 = State(1.0, -2.0, 0.3, 0.0)
    assert step(x0, Control(0.0, 0.35), P) == x0


def test_turning_step_matches_scalar_arithmetic():
    x = step(State(0, 0, 0, 2.5), Control(0, 0.2), P)
    assert x.px == 2.5 * math.cos(0.0) * 0.2
    assert x.py == 0.0
    assert math.isclose(x.theta, 2.5 / 0.33 * math.tan(0.2) * 0.2, rel_tol=0, abs_tol=1e-15)
    assert x.v == 2.5


def test_velocity_clamped():
    assert step(State(0, 0, 0, 2.9), Control(3.0, 0), P).v == P.v_max
    assert step(State(0, 0, 0, 0.1), Control(-3.0, 0), P).v == P.v_min


def test_reduced_step_straight_and_mirror():
    x, y, th = reduced_step((1.0, 2.0, 0.5), 0.0, 2.5, P)
    assert math.isclose(x, 1.0 + 0.5 * math.cos(0.5), abs_tol=1e-15)
    assert math.isclose(y, 2.0 + 0.5 * math.sin(0.5), abs_tol=1e-15)
    assert th == 0.5
    left = reduced_step((0, 0, 0), 0.3, 2.5, P)
    right = reduced_step((0, 0, 0), -0.3, 2.5, P)
    assert left[0] == right[0] and left[1] == -right[1] and left[2] == -right[2]


def test_reduced_matches_full_projection():
    rng = np.random.default_rng(0)
    poses = np.column_stack([rng.uniform(-5, 5, 1000), rng.uniform(-5, 5, 1000), rng.uniform(-np.pi, np.pi, 1000)])
    deltas = rng.uniform(-0.4, 0.4, 1000)
    v = 2.5
    full = step_batch(np.column_stack([poses, np.full(1000, v)]), np.column_stack([np.zeros(1000), deltas]), P)
    red = reduced_step_batch(poses, deltas, v, P)
    assert np.array_equal(full[:, :3], red)


def test_rollout_empty_and_repeated_step():
    x0 = State(0.0, 0.0, 0.2, 1.0)
    assert rollout(x0, [], P).states == [x0]
    us = [Control(0.5, 0.1), Control(-1.0, -0.2), Control(0.0, 0.4)]
    traj = rollout(x0, us, P)
    x = x0
    for u, s in zip(us, traj.states[1:]):
        x = step(x, u, P)
        assert s == x
    batch = rollout_batch(x0.as_array(), np.array([[u.as_array() for u in us]]), P)[0]
    assert np.array_equal(batch, traj.states_array())


def test_zero_control_rollout_is_collinear():
    traj = rollout_batch(np.array([1.0, 1.0, 0.7, 1.5]), np.zeros((1, 10, 2)), P)[0]
    d = traj[1:, :2] - traj[0, :2]
    cross = d[:, 0] * math.sin(0.7) - d[:, 1] * math.cos(0.7)
    assert np.abs(cross).max() < 1e-12


def test_clamp_examples():
    assert clamp_control(Control(10, -10), P) == Control(3.0, -0.4)
    assert clamp_control(Control(1.0, 0.1), P) == Control(1.0, 0.1)


@given(st.lists(st.tuples(finite, finite), min_size=1, max_size=20))
def test_clamp_idempotent(us):
    u = np.array(us)
    once = clamp_controls(u, P)
    assert np.array_equal(clamp_controls(once, P), once)
    assert (np.abs(once[:, 0]) <= P.a_max).all() and (np.abs(once[:, 1]) <= P.delta_max).all()


@given(finite, finite, angle, st.floats(0, 3), st.floats(-10, 10), st.floats(-1, 1))
def test_step_invariants(x, y, th, v, a, d):
    out = step(State(x, y, th, v), clamp_control(Control(a, d), P), P)
    assert P.v_min <= out.v <= P.v_max
    assert -math.pi < out.theta <= math.pi


@given(st.floats(-100, 100, allow_nan=False))
def test_normalize_angle_range(th):
    w = normalize_angle(th)
    assert -math.pi < w <= math.pi
    assert math.isclose(math.cos(w), math.cos(th), abs_tol=1e-9)


def test_straight_line_closed_form_many():
    rng = np.random.default_rng(1)
    n_cases = 10_000
    v = rng.uniform(0.0, 3.0, n_cases)
    th = rng.uniform(-math.pi, math.pi, n_cases)
    n = rng.integers(0, 51, n_cases)
    x0 = rng.uniform(-5, 5, (n_cases, 2))
    states = np.column_stack([x0, th, v])
    for k in range(n.max()):
        moved = step_batch(states, np.zeros((n_cases, 2)), P)
        states = np.where((k < n)[:, None], moved, states)
    expect = x0 + (n * v * P.dt)[:, None] * np.column_stack([np.cos(th), np.sin(th)])
    assert np.abs(states[:, :2] - expect).max() <= 1e-12
