"""Trajectory cost, MPPI weighting and the hybrid sampling controllers.

Planning happens in the robot-centered frame of the current local map: the
robot sits at the origin facing +x and the goal is given in that frame.
"""
from __future__ import annotations

import time
from dataclasses import dataclass, field, replace

import numpy as np

from .dynamics import DynamicsParams, State, Trajectory, clamp_controls, rollout_batch
from .env import DEFAULT_FOOTPRINT_RADIUS, LocalPerception, OccupancyGrid
from .flowpolicy import FlowPolicy, compute_cfu_policy, compute_cuniform_policy
from .levelsets import DiscretizationSpec, NoSafeHorizonError
from .samplers import PerturbationSpec, sample_perturbations, sample_policy_trajectories

CONTROLLER_KINDS = ("mppi", "logmppi", "cu-mppi", "cfu-mppi", "cu-logmppi", "cfu-logmppi")


@dataclass(frozen=True)
class CostParams:
    w_dist: float = 1.0
    w_term: float = 10.0
    occupancy_scale: float = 5.0
    P_obs: float = 1e6
    O_thresh: float = 0.9
    goal_tolerance: float = 0.3
    footprint_radius: float = DEFAULT_FOOTPRINT_RADIUS
    check_midpoints: bool = True

    def __post_init__(self):
        if min(self.w_dist, self.w_term, self.occupancy_scale, self.P_obs) < 0:
            raise ValueError("cost weights must be non-negative")
        if not 0.0 < self.O_thresh <= 1.0:
            raise ValueError("O_thresh must lie in (0, 1]")
        if self.goal_tolerance < 0 or self.footprint_radius < 0:
            raise ValueError("tolerances must be non-negative")


@dataclass(frozen=True)
class MppiParams:
    K_mppi: int = 512
    lam: float = 0.5
    variance: tuple[float, float] = (0.5**2, 0.1**2)
    N_opt: int = 1
    K_init: int = 0

    def __post_init__(self):
        if self.lam <= 0:
            raise ValueError("temperature must be positive")
        if self.K_mppi < 1 or self.N_opt < 1 or self.K_init < 0:
            raise ValueError("invalid sample budgets")

    @classmethod
    def for_budget(cls, kind: str, budget: int, **kw) -> "MppiParams":
        """Split a per-step rollout budget; hybrids give half to the policy stage."""
        n_opt = kw.pop("N_opt", 1)
        if kind in ("mppi", "logmppi"):
            return cls(K_mppi=max(budget // n_opt, 1), N_opt=n_opt, K_init=0, **kw)
        k_init = max(budget // 2, 1)
        return cls(K_mppi=max((budget - k_init) // n_opt, 1), N_opt=n_opt, K_init=k_init, **kw)


# ---------------------------------------------------------------------------
# Cost


def _footprint_occupancy(costmap, points: np.ndarray, radius: float) -> np.ndarray:
    if isinstance(costmap, LocalPerception):
        return costmap.footprint_occupancy(points, radius)
    if isinstance(costmap, OccupancyGrid):
        from .env import SdfGrid

        dummy = SdfGrid(costmap.geometry, np.zeros(costmap.geometry.shape))
        return LocalPerception(costmap, dummy).footprint_occupancy(points, radius)
    if costmap is None:
        return np.zeros(np.asarray(points).shape[:-1])
    raise TypeError(f"unsupported costmap type {type(costmap).__name__}")


def batch_cost(states: np.ndarray, goal, costmap, cp: CostParams = CostParams()) -> np.ndarray:
    """Costs of ``(K, T + 1, >=2)`` state arrays.

    Per state: ``w_dist * d^2`` plus the obstacle term, or ``P_obs`` alone when
    the footprint occupancy exceeds the threshold (optionally also tested at the
    midpoint of the segment leading to the state). The last state also pays
    ``w_term * d^2``. Accumulation stops after the first collision or the first
    state within the goal tolerance (that state still pays its own cost).
    """
    states = np.asarray(states, dtype=float)
    goal = np.asarray(goal, dtype=float)[:2]
    d2 = np.sum((states[..., :2] - goal) ** 2, axis=-1)
    occ = _footprint_occupancy(costmap, states[..., :2], cp.footprint_radius)
    coll = occ > cp.O_thresh
    if cp.check_midpoints and states.shape[1] > 1:
        # fast segments can skip over thin obstacles between states
        mid = 0.5 * (states[:, 1:, :2] + states[:, :-1, :2])
        coll[:, 1:] |= _footprint_occupancy(costmap, mid, cp.footprint_radius) > cp.O_thresh
    step = np.where(coll, cp.P_obs, cp.w_dist * d2 + cp.occupancy_scale * occ)
    stop = coll | (d2 <= cp.goal_tolerance**2)
    stopped_before = np.zeros_like(stop)
    stopped_before[:, 1:] = np.cumsum(stop, axis=1)[:, :-1] > 0
    total = np.sum(np.where(stopped_before, 0.0, step), axis=1)
    never = ~stop.any(axis=1)
    return total + np.where(never, cp.w_term * d2[:, -1], 0.0)


def trajectory_cost(traj, goal, costmap, cp: CostParams = CostParams()) -> float:
    states = traj.states_array() if isinstance(traj, Trajectory) else np.asarray(traj, dtype=float)
    return float(batch_cost(states[None], goal, costmap, cp)[0])


# ---------------------------------------------------------------------------
# MPPI


def softmax_weights(costs: np.ndarray, lam: float) -> np.ndarray:
    c = np.asarray(costs, dtype=float)
    w = np.exp(-(c - c.min()) / lam)
    return w / w.sum()


@dataclass
class UpdateInfo:
    costs: np.ndarray
    weights: np.ndarray
    states: np.ndarray
    controls: np.ndarray


def mppi_update(
    nominal: np.ndarray,
    x,
    goal,
    perception,
    mp: MppiParams = MppiParams(),
    cp: CostParams = CostParams(),
    pert: PerturbationSpec | None = None,
    seed: int = 0,
    p: DynamicsParams | None = None,
) -> tuple[np.ndarray, UpdateInfo]:
    """One importance-weighted refinement of ``nominal`` ``(T, 2)``."""
    p = p or DynamicsParams()
    pert = pert or PerturbationSpec("gaussian", mp.variance)
    nominal = np.asarray(nominal, dtype=float)
    controls, noise = sample_perturbations(nominal, pert, mp.K_mppi, seed, p)
    x0 = x.as_array() if isinstance(x, State) else np.asarray(x, dtype=float)
    states = rollout_batch(x0, controls, p)
    costs = batch_cost(states, goal, perception, cp)
    w = softmax_weights(costs, mp.lam)
    updated = clamp_controls(nominal + np.tensordot(w, noise, axes=1), p)
    return updated, UpdateInfo(costs, w, states, controls)


# ---------------------------------------------------------------------------
# Control loop


@dataclass
class ControllerOutput:
    control: np.ndarray  # (2,) first control of the updated nominal
    nominal: np.ndarray  # (T, 2)
    diagnostics: dict = field(default_factory=dict)


@dataclass
class ControllerConfig:
    kind: str = "cfu-mppi"
    budget: int = 512
    mppi: MppiParams | None = None
    cost: CostParams = field(default_factory=CostParams)
    spec: DiscretizationSpec = field(default_factory=DiscretizationSpec)
    dynamics: DynamicsParams = field(default_factory=DynamicsParams)
    sigma_ln: float = 0.5

    def __post_init__(self):
        if self.kind not in CONTROLLER_KINDS:
            raise ValueError(f"unknown controller {self.kind!r}; expected one of {CONTROLLER_KINDS}")
        if self.budget < 1:
            raise ValueError("budget must be positive")
        if self.mppi is None:
            self.mppi = MppiParams.for_budget(self.kind, self.budget)

    @property
    def horizon(self) -> int:
        return self.spec.horizon

    @property
    def perturbation(self) -> PerturbationSpec:
        if self.kind.endswith("logmppi"):
            return PerturbationSpec("normal-lognormal", self.mppi.variance, self.sigma_ln)
        return PerturbationSpec("gaussian", self.mppi.variance)

    @property
    def policy_kind(self) -> str | None:
        if self.kind.startswith("cfu-"):
            return "cfu"
        if self.kind.startswith("cu-"):
            return "cuniform"
        return None


class Controller:
    """Stateful controller; keeps the nominal sequence between cycles."""

    def __init__(self, config: ControllerConfig | None = None):
        self.config = config or ControllerConfig()
        self.nominal = np.zeros((self.config.horizon, 2))

    def reset(self) -> None:
        self.nominal = np.zeros((self.config.horizon, 2))

    def _warm_start(self) -> np.ndarray:
        nom = np.empty_like(self.nominal)
        nom[:-1] = self.nominal[1:]
        nom[-1] = self.nominal[-1]
        return nom

    def _policy(self, perception: LocalPerception) -> FlowPolicy:
        cfg = self.config
        if cfg.policy_kind == "cuniform":
            return compute_cuniform_policy(cfg.spec, cfg.cost.footprint_radius)
        return compute_cfu_policy(perception, (0.0, 0.0, 0.0), cfg.spec, cfg.cost.footprint_radius)[1]

    def step(self, v_curr: float, goal, perception: LocalPerception, seed: int = 0) -> ControllerOutput:
        """One control cycle from the local-frame state ``(0, 0, 0, v_curr)``."""
        cfg = self.config
        t0 = time.perf_counter()
        x = np.array([0.0, 0.0, 0.0, v_curr])
        p = cfg.dynamics
        mp = cfg.mppi
        diag = {"kind": cfg.kind, "degraded": False, "rollouts": 0}
        ss = np.random.SeedSequence(seed)
        init_seed, *opt_seeds = (int(s.generate_state(1)[0]) for s in ss.spawn(1 + mp.N_opt))
        nominal = self._warm_start()
        init_batch = None

        if cfg.policy_kind is not None:
            try:
                policy = self._policy(perception)
            except NoSafeHorizonError:
                policy = None
                diag["degraded"] = True
                mp = replace(mp, K_mppi=max(cfg.budget // mp.N_opt, 1))
            if policy is not None:
                init_batch = sample_policy_trajectories(
                    policy, (0.0, 0.0, 0.0), v_curr, mp.K_init, cfg.horizon, p, init_seed, perception, cfg.cost.footprint_radius
                )
                costs = batch_cost(init_batch.states, goal, perception, cfg.cost)
                best = int(np.argmin(costs))
                nominal = init_batch.controls[best].copy()
                diag["rollouts"] += mp.K_init
                diag["init_best_cost"] = float(costs[best])
                diag["init_collision_free"] = int((~init_batch.collided).sum())

        info = None
        for s in opt_seeds:
            nominal, info = mppi_update(nominal, x, goal, perception, mp, cfg.cost, cfg.perturbation, s, p)
            diag["rollouts"] += mp.K_mppi
        self.nominal = nominal
        chosen = rollout_batch(x, nominal[None], p)[0]
        diag["best_cost"] = float(info.costs.min())
        diag["nominal_cost"] = float(batch_cost(chosen[None], goal, perception, cfg.cost)[0])
        diag["collision_free"] = int(np.sum(info.costs < cfg.cost.P_obs))
        diag["wall_time"] = time.perf_counter() - t0
        diag["chosen_states"] = chosen
        diag["samples"] = info.states
        diag["init_samples"] = None if init_batch is None else init_batch.states
        return ControllerOutput(nominal[0].copy(), nominal.copy(), diag)


def control_step(
    kind: str,
    x: State,
    goal,
    perception: LocalPerception,
    budget: int = 512,
    seed: int = 0,
    nominal: np.ndarray | None = None,
    **config,
) -> ControllerOutput:
    """Stateless single cycle; ``x`` is only used for its speed (the map is robot-centered)."""
    ctrl = Controller(ControllerConfig(kind=kind, budget=budget, **config))
    if nominal is not None:
        # the stored nominal is shifted before use, so pre-shift it back
        nom = np.asarray(nominal, dtype=float)
        ctrl.nominal = np.concatenate([nom[:1], nom[:-1]])
    v = x.v if isinstance(x, State) else float(np.asarray(x)[3])
    return ctrl.step(v, goal, perception, seed)
