"""Kinematic single-track (bicycle) model with forward-Euler integration.

Scalar helpers operate on :class:`State` / :class:`Control` values; the
``*_batch`` variants work on numpy arrays and share the exact same arithmetic,
so scalar and vectorized results agree bit for bit.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Sequence

import numpy as np


def normalize_angle(theta):
    """Wrap angles to (-pi, pi]; in-range angles are returned unchanged."""
    wrapped = np.pi - np.mod(np.pi - theta, 2.0 * np.pi)
    return np.where((theta > -np.pi) & (theta <= np.pi), theta, wrapped)


@dataclass(frozen=True)
class DynamicsParams:
    wheelbase: float = 0.33
    dt: float = 0.2
    a_max: float = 3.0
    delta_max: float = 0.4
    v_min: float = 0.0
    v_max: float = 3.0

    def __post_init__(self):
        if self.wheelbase <= 0:
            raise ValueError("wheelbase must be positive")
        if self.dt <= 0:
            raise ValueError("dt must be positive")
        if self.v_min > self.v_max:
            raise ValueError("v_min must not exceed v_max")


@dataclass(frozen=True)
class State:
    px: float
    py: float
    theta: float
    v: float

    def as_array(self) -> np.ndarray:
        return np.array([self.px, self.py, self.theta, self.v], dtype=float)

    @property
    def pose(self) -> tuple[float, float, float]:
        return (self.px, self.py, self.theta)

    @classmethod
    def from_array(cls, arr) -> "State":
        return cls(float(arr[0]), float(arr[1]), float(arr[2]), float(arr[3]))


@dataclass(frozen=True)
class Control:
    a: float
    delta: float

    def as_array(self) -> np.ndarray:
        return np.array([self.a, self.delta], dtype=float)


@dataclass
class Trajectory:
    states: list[State]
    controls: list[Control] = field(default_factory=list)

    def __post_init__(self):
        if len(self.states) != len(self.controls) + 1:
            raise ValueError("a trajectory needs exactly one more state than controls")

    def states_array(self) -> np.ndarray:
        return np.array([s.as_array() for s in self.states], dtype=float).reshape(-1, 4)

    def controls_array(self) -> np.ndarray:
        return np.array([u.as_array() for u in self.controls], dtype=float).reshape(-1, 2)


def step_batch(states: np.ndarray, controls: np.ndarray, p: DynamicsParams, dt: float | None = None) -> np.ndarray:
    """Advance ``(..., 4)`` states by one Euler step under ``(..., 2)`` controls."""
    dt = p.dt if dt is None else dt
    px, py, th, v = states[..., 0], states[..., 1], states[..., 2], states[..., 3]
    a, delta = controls[..., 0], controls[..., 1]
    out = np.empty(np.broadcast_shapes(states.shape, controls.shape[:-1] + (4,)), dtype=float)
    out[..., 0] = px + v * np.cos(th) * dt
    out[..., 1] = py + v * np.sin(th) * dt
    out[..., 2] = normalize_angle(th + (v / p.wheelbase) * np.tan(delta) * dt)
    out[..., 3] = np.clip(v + a * dt, p.v_min, p.v_max)
    return out


def reduced_step_batch(poses: np.ndarray, deltas, v_nominal: float, p: DynamicsParams, dt: float | None = None) -> np.ndarray:
    """Fixed-velocity model on ``(..., 3)`` poses; identical arithmetic to :func:`step_batch`."""
    dt = p.dt if dt is None else dt
    deltas = np.asarray(deltas, dtype=float)
    x, y, th = poses[..., 0], poses[..., 1], poses[..., 2]
    shape = np.broadcast_shapes(x.shape, deltas.shape)
    out = np.empty(shape + (3,), dtype=float)
    out[..., 0] = x + v_nominal * np.cos(th) * dt
    out[..., 1] = y + v_nominal * np.sin(th) * dt
    out[..., 2] = normalize_angle(th + (v_nominal / p.wheelbase) * np.tan(deltas) * dt)
    return out


def step(x: State, u: Control, p: DynamicsParams) -> State:
    out = step_batch(x.as_array()[None], u.as_array()[None], p)[0]
    return State.from_array(out)


def reduced_step(pose, delta: float, v_nominal: float, p: DynamicsParams) -> tuple[float, float, float]:
    out = reduced_step_batch(np.asarray(pose, dtype=float)[None], np.array([delta]), v_nominal, p)[0]
    return (float(out[0]), float(out[1]), float(out[2]))


def clamp_controls(controls: np.ndarray, p: DynamicsParams) -> np.ndarray:
    out = np.array(controls, dtype=float, copy=True)
    out[..., 0] = np.clip(out[..., 0], -p.a_max, p.a_max)
    out[..., 1] = np.clip(out[..., 1], -p.delta_max, p.delta_max)
    return out


def clamp_control(u: Control, p: DynamicsParams) -> Control:
    a, d = clamp_controls(u.as_array(), p)
    return Control(float(a), float(d))


def rollout_batch(x0: np.ndarray, controls: np.ndarray, p: DynamicsParams, dt: float | None = None) -> np.ndarray:
    """Roll ``(K, T, 2)`` control sequences from ``x0`` (shape ``(4,)`` or ``(K, 4)``).

    Returns states of shape ``(K, T + 1, 4)``.
    """
    controls = np.asarray(controls, dtype=float)
    K, T = controls.shape[:2]
    states = np.empty((K, T + 1, 4), dtype=float)
    states[:, 0] = np.broadcast_to(np.asarray(x0, dtype=float), (K, 4))
    for t in range(T):
        states[:, t + 1] = step_batch(states[:, t], controls[:, t], p, dt)
    return states


def rollout(x0: State, controls: Sequence[Control], p: DynamicsParams) -> Trajectory:
    states = [x0]
    for u in controls:
        states.append(step(states[-1], u, p))
    return Trajectory(states=states, controls=list(controls))
