"""Trajectory-distribution generators.

Gaussian and normal-lognormal perturbation samplers feed MPPI-style
controllers; policy samplers roll out a per-cell action distribution with the
fixed-velocity model.

All random draws come from one generator per call and are laid out
rollout-major, so the first ``K`` rollouts of a batch of size ``K' > K`` are
exactly the batch of size ``K`` with the same seed.
"""
from __future__ import annotations

import json
from dataclasses import dataclass
from functools import cached_property
from pathlib import Path

import numpy as np

from .dynamics import Control, DynamicsParams, State, Trajectory, clamp_controls, reduced_step_batch, rollout_batch
from .env import DEFAULT_FOOTPRINT_RADIUS, footprint_in_collision_many
from .flowpolicy import FlowPolicy
from .levelsets import DiscretizationSpec, cell_keys

SAMPLER_KINDS = ("mppi", "logmppi", "cuniform", "cfu")

# fallback tiers reported by query_policy
TIER_EXACT = 0
TIER_OTHER_LEVEL = 1
TIER_FREE_ACTIONS = 2
TIER_ALL_ACTIONS = 3


@dataclass(frozen=True)
class PerturbationSpec:
    kind: str = "gaussian"
    variance: tuple[float, float] = (0.5**2, 0.1**2)
    sigma_ln: float = 0.5

    def __post_init__(self):
        if self.kind not in ("gaussian", "normal-lognormal"):
            raise ValueError(f"unknown perturbation kind {self.kind!r}")
        object.__setattr__(self, "variance", tuple(float(v) for v in self.variance))
        if len(self.variance) != 2 or min(self.variance) <= 0:
            raise ValueError("variances must be two positive numbers")
        if self.kind == "normal-lognormal" and self.sigma_ln <= 0:
            raise ValueError("sigma_ln must be positive")

    @property
    def std(self) -> np.ndarray:
        return np.sqrt(np.asarray(self.variance))

    @classmethod
    def log_mppi(cls, variance=(0.5**2, 0.1**2), sigma_ln: float = 0.5) -> "PerturbationSpec":
        return cls("normal-lognormal", variance, sigma_ln)


def draw_noise(spec: PerturbationSpec, K: int, T: int, rng: np.random.Generator) -> np.ndarray:
    """Raw ``(K, T, 2)`` perturbations (before clamping)."""
    if K < 1:
        raise ValueError("K must be at least 1")
    if spec.kind == "gaussian":
        return rng.standard_normal((K, T, 2)) * spec.std
    g = rng.standard_normal((K, T, 4))
    s = spec.sigma_ln
    scale = np.exp(-0.5 * s * s + s * g[..., 2:])
    return g[..., :2] * spec.std * scale


def sample_perturbations(
    nominal: np.ndarray, spec: PerturbationSpec, K: int, seed: int, p: DynamicsParams | None = None
) -> tuple[np.ndarray, np.ndarray]:
    """``K`` clamped control sequences around ``nominal`` ``(T, 2)``.

    Returns ``(controls, effective_noise)`` where the effective noise is the
    clamped sequence minus the nominal.
    """
    p = p or DynamicsParams()
    nominal = np.asarray(nominal, dtype=float).reshape(-1, 2)
    rng = np.random.default_rng(seed)
    noise = draw_noise(spec, K, len(nominal), rng)
    controls = clamp_controls(nominal[None] + noise, p)
    return controls, controls - nominal[None]


# ---------------------------------------------------------------------------
# Batches


@dataclass(eq=False)
class TrajectoryBatch:
    states: np.ndarray  # (K, T + 1, 4)
    controls: np.ndarray  # (K, T, 2)
    collided: np.ndarray  # (K,) bool
    first_collision: np.ndarray  # (K,) int, -1 when collision-free
    sampler: str = ""

    def __post_init__(self):
        if self.states.ndim != 3 or self.controls.shape[:2] != (self.states.shape[0], self.states.shape[1] - 1):
            raise ValueError("states must be (K, T + 1, 4) and controls (K, T, 2)")

    def __len__(self) -> int:
        return self.states.shape[0]

    @property
    def horizon(self) -> int:
        return self.controls.shape[1]

    @cached_property
    def trajectories(self) -> list[Trajectory]:
        out = []
        for xs, us in zip(self.states, self.controls):
            out.append(Trajectory([State.from_array(x) for x in xs], [Control(float(a), float(d)) for a, d in us]))
        return out

    def head(self, K: int) -> "TrajectoryBatch":
        return TrajectoryBatch(self.states[:K], self.controls[:K], self.collided[:K], self.first_collision[:K], self.sampler)

    def to_dict(self) -> dict:
        return {
            "sampler": self.sampler,
            "states": self.states.tolist(),
            "controls": self.controls.tolist(),
            "collided": self.collided.tolist(),
            "first_collision": self.first_collision.tolist(),
        }

    @classmethod
    def from_dict(cls, d: dict) -> "TrajectoryBatch":
        return cls(
            np.asarray(d["states"], dtype=float),
            np.asarray(d["controls"], dtype=float),
            np.asarray(d["collided"], dtype=bool),
            np.asarray(d["first_collision"], dtype=np.int64),
            d.get("sampler", ""),
        )

    def save(self, path: str | Path) -> None:
        Path(path).write_text(json.dumps(self.to_dict()))

    @classmethod
    def load(cls, path: str | Path) -> "TrajectoryBatch":
        return cls.from_dict(json.loads(Path(path).read_text()))


def collision_flags(states: np.ndarray, world, footprint_radius: float = DEFAULT_FOOTPRINT_RADIUS) -> tuple[np.ndarray, np.ndarray]:
    """Per-trajectory collision flag and first colliding state index (-1 if none)."""
    K = states.shape[0]
    if world is None:
        return np.zeros(K, dtype=bool), np.full(K, -1, dtype=np.int64)
    hit = footprint_in_collision_many(states[..., :2], world, footprint_radius)
    collided = hit.any(axis=1)
    first = np.where(collided, hit.argmax(axis=1), -1).astype(np.int64)
    return collided, first


def make_batch(states: np.ndarray, controls: np.ndarray, world, footprint_radius: float = DEFAULT_FOOTPRINT_RADIUS, sampler: str = "") -> TrajectoryBatch:
    collided, first = collision_flags(states, world, footprint_radius)
    return TrajectoryBatch(states, controls, collided, first, sampler)


def sample_perturbation_batch(
    x0,
    nominal: np.ndarray,
    spec: PerturbationSpec,
    K: int,
    seed: int,
    p: DynamicsParams | None = None,
    world=None,
    footprint_radius: float = DEFAULT_FOOTPRINT_RADIUS,
) -> TrajectoryBatch:
    p = p or DynamicsParams()
    controls, _ = sample_perturbations(nominal, spec, K, seed, p)
    states = rollout_batch(_as_state_array(x0), controls, p)
    name = "mppi" if spec.kind == "gaussian" else "logmppi"
    return make_batch(states, controls, world, footprint_radius, name)


def _as_state_array(x0, v: float | None = None) -> np.ndarray:
    if isinstance(x0, State):
        arr = x0.as_array()
    else:
        arr = np.zeros(4)
        x = np.asarray(x0, dtype=float)
        arr[: len(x)] = x
    if v is not None:
        arr[3] = v
    return arr


# ---------------------------------------------------------------------------
# Policy rollouts


def _free_action_mask(poses: np.ndarray, actions: np.ndarray, v: float, p: DynamicsParams, world, radius: float) -> np.ndarray:
    succ = reduced_step_batch(poses[:, None, :], actions[None, :], v, p)
    return ~footprint_in_collision_many(succ[..., :2], world, radius)


def query_policy_batch(
    policy: FlowPolicy,
    poses: np.ndarray,
    t: int,
    world=None,
    v: float | None = None,
    p: DynamicsParams | None = None,
    footprint_radius: float = DEFAULT_FOOTPRINT_RADIUS,
) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Action distributions for ``(K, 3)`` poses at step ``t``.

    Lookup order: the pose's cell at level ``t``; the same cell at the lowest
    level that holds it; uniform over one-step collision-free actions; uniform
    over all actions. Returns ``(probs, tier, reps)``; ``reps`` holds the
    cell representative for table hits and NaN otherwise.
    """
    spec = policy.spec
    poses = np.asarray(poses, dtype=float).reshape(-1, 3)
    K, m = len(poses), spec.n_actions
    probs = np.zeros((K, m))
    tier = np.full(K, TIER_FREE_ACTIONS, dtype=np.int64)
    reps = np.full((K, 3), np.nan)
    keys, valid = cell_keys(poses, spec)
    todo = valid.copy()

    def take(lv_index: int, mask: np.ndarray, tier_id: int):
        lv = policy.levels[lv_index]
        idx = np.flatnonzero(mask)
        rows = lv.find(keys[idx])
        hit = rows >= 0
        sel, r = idx[hit], rows[hit]
        probs[sel] = lv.probs[r]
        reps[sel] = lv.reps[r]
        tier[sel] = tier_id
        mask[sel] = False

    if 0 <= t < policy.horizon:
        take(t, todo, TIER_EXACT)
    for lv_index in range(policy.horizon):
        if not todo.any():
            break
        if lv_index != t:
            take(lv_index, todo, TIER_OTHER_LEVEL)

    rest = np.flatnonzero(tier == TIER_FREE_ACTIONS)
    if len(rest):
        if world is None:
            free = np.zeros((len(rest), m), dtype=bool)
        else:
            p = p or spec.dynamics()
            v = spec.v_nominal if v is None else v
            free = _free_action_mask(poses[rest], np.asarray(spec.action_set), v, p, world, footprint_radius)
        none = ~free.any(axis=1)
        free[none] = True
        tier[rest[none]] = TIER_ALL_ACTIONS
        probs[rest] = free / free.sum(axis=1, keepdims=True)
    return probs, tier, reps


def query_policy(
    policy: FlowPolicy,
    pose,
    t: int,
    world=None,
    v: float | None = None,
    p: DynamicsParams | None = None,
    footprint_radius: float = DEFAULT_FOOTPRINT_RADIUS,
) -> tuple[np.ndarray, int]:
    probs, tier, _ = query_policy_batch(policy, np.asarray(pose, dtype=float)[None, :3], t, world, v, p, footprint_radius)
    return probs[0], int(tier[0])


def draw_actions(probs: np.ndarray, u: np.ndarray) -> np.ndarray:
    """Inverse-CDF draw of one action index per row given uniforms ``u`` in [0, 1)."""
    cdf = np.cumsum(probs, axis=1)
    idx = (cdf <= (u * cdf[:, -1])[:, None]).sum(axis=1)
    return np.minimum(idx, probs.shape[1] - 1)


def sample_policy_trajectories(
    policy: FlowPolicy,
    x0=(0.0, 0.0, 0.0),
    v: float | None = None,
    K: int = 512,
    T: int | None = None,
    p: DynamicsParams | None = None,
    seed: int = 0,
    world=None,
    footprint_radius: float = DEFAULT_FOOTPRINT_RADIUS,
    snap: bool = False,
    sampler: str = "policy",
) -> TrajectoryBatch:
    """``K`` fixed-velocity rollouts driven by ``policy``.

    ``world`` is used both for the collision-free fallback tier and for the
    batch collision flags. With ``snap`` each table hit is advanced from its
    cell representative, so rollouts follow the graph edges exactly.
    """
    if K < 1:
        raise ValueError("K must be at least 1")
    spec = policy.spec
    p = p or spec.dynamics()
    v = spec.v_nominal if v is None else float(v)
    T = policy.horizon if T is None else T
    actions = np.asarray(spec.action_set)
    rng = np.random.default_rng(seed)
    u = rng.random((K, T))

    x = _as_state_array(x0, v)
    poses = np.empty((K, T + 1, 3))
    poses[:, 0] = x[:3]
    deltas = np.empty((K, T))
    for t in range(T):
        probs, _, reps = query_policy_batch(policy, poses[:, t], t, world, v, p, footprint_radius)
        a = draw_actions(probs, u[:, t])
        deltas[:, t] = actions[a]
        base = poses[:, t]
        if snap:
            base = np.where(np.isnan(reps), base, reps)
        poses[:, t + 1] = reduced_step_batch(base, deltas[:, t], v, p)
    states = np.empty((K, T + 1, 4))
    states[..., :3] = poses
    states[..., 3] = v
    controls = np.stack([np.zeros_like(deltas), deltas], axis=-1)
    return make_batch(states, controls, world, footprint_radius, sampler)


def policy_for_sampler(kind: str, perception, spec: DiscretizationSpec | None = None, footprint_radius: float = DEFAULT_FOOTPRINT_RADIUS) -> FlowPolicy:
    from .flowpolicy import compute_cfu_policy, compute_cuniform_policy

    if kind == "cuniform":
        return compute_cuniform_policy(spec, footprint_radius)
    if kind == "cfu":
        return compute_cfu_policy(perception, (0.0, 0.0, 0.0), spec, footprint_radius)[1]
    raise ValueError(f"{kind!r} is not a policy sampler")


def sample_named(
    kind: str,
    perception,
    K: int,
    seed: int,
    spec: DiscretizationSpec | None = None,
    footprint_radius: float = DEFAULT_FOOTPRINT_RADIUS,
    policy: FlowPolicy | None = None,
) -> TrajectoryBatch:
    """One batch from a named sampler in the robot-centered frame.

    Perturbation samplers perturb a zero nominal at the nominal speed with the
    full model; policy samplers use the fixed-velocity model and snap to cell
    representatives.
    """
    spec = spec or DiscretizationSpec()
    if kind in ("mppi", "logmppi"):
        pert = PerturbationSpec() if kind == "mppi" else PerturbationSpec.log_mppi()
        nominal = np.zeros((spec.horizon, 2))
        x0 = np.array([0.0, 0.0, 0.0, spec.v_nominal])
        return sample_perturbation_batch(x0, nominal, pert, K, seed, spec.dynamics(), perception, footprint_radius)
    if kind in ("cuniform", "cfu"):
        policy = policy or policy_for_sampler(kind, perception, spec, footprint_radius)
        return sample_policy_trajectories(
            policy, (0.0, 0.0, 0.0), spec.v_nominal, K, spec.horizon, spec.dynamics(), seed, perception, footprint_radius, True, kind
        )
    raise ValueError(f"unknown sampler {kind!r}; expected one of {SAMPLER_KINDS}")
