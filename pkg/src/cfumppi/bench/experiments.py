"""Experiment harnesses: uniformity, single-frame success, scaling and navigation."""
from __future__ import annotations

import csv
import json
import logging
import math
import time
from dataclasses import asdict, dataclass, field
from pathlib import Path

import numpy as np

from ..controller import Controller, ControllerConfig
from ..dynamics import step_batch
from ..env import (
    LocalPerception,
    PolygonEnvironment,
    footprint_in_collision,
    oracle_local_maps,
    sample_free_poses,
    scan_to_local_maps,
    simulate_lidar,
    world_to_local,
)
from ..flowpolicy import FlowPolicy, compute_cfu_policy, compute_cuniform_policy
from ..levelsets import DiscretizationSpec, NoSafeHorizonError, SafeLevelSets, build_reachability_graph, prune_inevitable_collisions
from ..metrics import uniformity_report
from ..samplers import sample_named, sample_policy_trajectories
from .config import ExperimentConfig
from .tasks import NavigationTask, compute_navigation_tasks

log = logging.getLogger(__name__)

OUTCOMES = ("success", "collision", "timeout")


@dataclass
class ResultTable:
    columns: list[str]
    rows: list[dict] = field(default_factory=list)

    def add(self, **row) -> None:
        self.rows.append(row)

    def column(self, name: str) -> list:
        return [r[name] for r in self.rows]

    def where(self, **match) -> list[dict]:
        return [r for r in self.rows if all(r.get(k) == v for k, v in match.items())]

    def write_csv(self, path: str | Path) -> None:
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(self.columns)
            for r in self.rows:
                w.writerow([_fmt(r.get(c, "")) for c in self.columns])


def _fmt(v) -> str:
    if isinstance(v, (bool, np.bool_)):
        return str(int(v))
    if isinstance(v, (float, np.floating)):
        return repr(float(v))
    return str(v)


def perceive(env: PolygonEnvironment, pose, mode: str) -> LocalPerception:
    if mode == "simulated-lidar":
        return scan_to_local_maps(simulate_lidar(env, pose))
    return oracle_local_maps(env, pose)


def safe_sets(perception: LocalPerception, spec: DiscretizationSpec, footprint_radius: float) -> SafeLevelSets:
    g = build_reachability_graph(perception, (0.0, 0.0, 0.0), spec, footprint_radius)
    return prune_inevitable_collisions(g)[0]


@dataclass
class Frame:
    """A world pose with its local map, safe level sets and CFU policy."""

    env_id: str
    index: int
    pose: tuple[float, float, float]
    perception: LocalPerception
    safe: SafeLevelSets
    policy: FlowPolicy


def sample_frames(cfg: ExperimentConfig, env_id: str, env: PolygonEnvironment, count: int, max_draws: int = 200) -> list[Frame]:
    """Free world poses that admit a safe horizon, drawn deterministically."""
    spec, r = cfg.spec, cfg.footprint_radius
    poses = sample_free_poses(env, max_draws, r, seed=cfg.seed("poses", env_id))
    frames = []
    for pose in poses:
        if len(frames) == count:
            break
        per = perceive(env, pose, cfg.perception)
        try:
            safe, policy = compute_cfu_policy(per, (0.0, 0.0, 0.0), spec, r)
        except NoSafeHorizonError:
            continue
        frames.append(Frame(env_id, len(frames), tuple(float(c) for c in pose), per, safe, policy))
    if len(frames) < count:
        log.warning("%s: only %d of %d poses admit a safe horizon", env_id, len(frames), count)
    return frames


# ---------------------------------------------------------------------------
# Uniformity


UNIFORMITY_COLUMNS = ["env", "pose", "sampler", "budget", "seed", "avg_kl", "collision_free_ratio", "avg_entropy_ratio", "kl_levels", "entropy_levels"]


def run_uniformity(cfg: ExperimentConfig, frames: dict | None = None) -> ResultTable:
    table = ResultTable(UNIFORMITY_COLUMNS)
    spec, r = cfg.spec, cfg.footprint_radius
    for env_id, env in cfg.environments():
        env_frames = frames[env_id] if frames else sample_frames(cfg, env_id, env, cfg.poses_per_env)
        if not env_frames:
            log.warning("%s skipped: no safe horizon", env_id)
        for fr in env_frames:
            seed = cfg.seed("uniformity", env_id, fr.index)
            for kind in cfg.samplers:
                policy = fr.policy if kind == "cfu" else None
                batch = sample_named(kind, fr.perception, cfg.uniformity_budget, seed, spec, r, policy)
                rep = uniformity_report(batch, fr.safe, kind, seed)
                table.add(
                    env=env_id,
                    pose=fr.index,
                    sampler=kind,
                    budget=cfg.uniformity_budget,
                    seed=seed,
                    avg_kl=rep.avg_kl,
                    collision_free_ratio=rep.collision_free_ratio,
                    avg_entropy_ratio=rep.avg_entropy_ratio,
                    kl_levels=";".join(repr(float(k)) for k in rep.kl),
                    entropy_levels=";".join(repr(float(e)) for e in rep.entropy_ratio),
                )
    return table


# ---------------------------------------------------------------------------
# Single-frame success


SINGLE_FRAME_COLUMNS = ["env", "trial", "pose", "sampler", "budget", "seed", "goal_x", "goal_y", "success"]


def frame_goal(fr: Frame, seed: int) -> np.ndarray:
    """Uniformly chosen cell of the last safe level; returns its center (local frame)."""
    spec = fr.safe.spec
    keys = fr.safe.levels[-1].keys
    k = int(keys[np.random.default_rng(seed).integers(len(keys))])
    from ..levelsets import cell_center, key_to_cell

    cx, cy, _ = cell_center(key_to_cell(k, spec), spec)
    return np.array([cx, cy])


def batch_successes(batch, goal, tolerance: float, budgets) -> list[bool]:
    """Success per budget over nested batch prefixes."""
    ok = ~batch.collided & (np.hypot(*(batch.states[:, -1, :2] - goal).T) <= tolerance)
    first = int(np.argmax(ok)) if ok.any() else len(ok)
    return [first < b for b in budgets]


def run_single_frame(cfg: ExperimentConfig, frames: dict | None = None) -> ResultTable:
    table = ResultTable(SINGLE_FRAME_COLUMNS)
    spec, r, tol = cfg.spec, cfg.footprint_radius, cfg.cost_params.goal_tolerance
    budgets = sorted(cfg.budgets)
    for env_id, env in cfg.environments():
        try:
            env_frames = frames[env_id] if frames else sample_frames(cfg, env_id, env, cfg.poses_per_env)
            if not env_frames:
                raise NoSafeHorizonError("no pose admits a safe horizon")
        except Exception as exc:  # per-map failures are logged, the run continues
            log.warning("%s skipped: %s", env_id, exc)
            continue
        for trial in range(cfg.trials_per_map):
            fr = env_frames[trial % len(env_frames)]
            goal = frame_goal(fr, cfg.seed("single-frame-goal", env_id, trial))
            seed = cfg.seed("single-frame", env_id, trial)
            for kind in cfg.samplers:
                policy = fr.policy if kind == "cfu" else None
                batch = sample_named(kind, fr.perception, budgets[-1], seed, spec, r, policy)
                for b, ok in zip(budgets, batch_successes(batch, goal, tol, budgets)):
                    table.add(env=env_id, trial=trial, pose=fr.index, sampler=kind, budget=b, seed=seed, goal_x=goal[0], goal_y=goal[1], success=ok)
    return table


# ---------------------------------------------------------------------------
# Scaling


SCALING_COLUMNS = ["env", "pose", "setting", "sampler", "v", "dt", "horizon", "budget", "seed", "avg_kl", "collision_free_ratio", "avg_entropy_ratio"]


def run_scaling(cfg: ExperimentConfig, frames: dict | None = None) -> ResultTable:
    """Roll training-parameter policies out under scaled speed / time step / horizon.

    Targets come from level sets recomputed with the scaled dynamics. Rollouts
    snap to cell representatives only when the dynamics match the training ones.
    """
    table = ResultTable(SCALING_COLUMNS)
    spec, r = cfg.spec, cfg.footprint_radius
    cu = compute_cuniform_policy(spec, r)
    for env_id, env in cfg.environments():
        env_frames = frames[env_id] if frames else sample_frames(cfg, env_id, env, cfg.poses_per_env)
        for fr in env_frames:
            seed = cfg.seed("uniformity", env_id, fr.index)
            for s in cfg.scaled_settings:
                scaled = DiscretizationSpec.from_dict({**spec.to_dict(), "v_nominal": s.v, "dt": s.dt, "horizon": s.horizon})
                try:
                    safe = safe_sets(fr.perception, scaled, r)
                except NoSafeHorizonError:
                    log.warning("%s pose %d skipped for %s: no safe horizon", env_id, fr.index, s.name)
                    continue
                same = math.isclose(s.v, spec.v_nominal) and math.isclose(s.dt, spec.dt)
                for kind in cfg.samplers:
                    if kind in ("mppi", "logmppi"):
                        continue
                    policy = fr.policy if kind == "cfu" else cu
                    batch = sample_policy_trajectories(
                        policy, (0.0, 0.0, 0.0), s.v, cfg.uniformity_budget, s.horizon, scaled.dynamics(), seed, fr.perception, r, same, kind
                    )
                    rep = uniformity_report(batch, safe, kind, seed)
                    table.add(
                        env=env_id,
                        pose=fr.index,
                        setting=s.name,
                        sampler=kind,
                        v=s.v,
                        dt=s.dt,
                        horizon=s.horizon,
                        budget=cfg.uniformity_budget,
                        seed=seed,
                        avg_kl=rep.avg_kl,
                        collision_free_ratio=rep.collision_free_ratio,
                        avg_entropy_ratio=rep.avg_entropy_ratio,
                    )
    return table


# ---------------------------------------------------------------------------
# Navigation


NAVIGATION_COLUMNS = ["task", "controller", "budget", "trial", "seed", "perception", "outcome", "path_length", "steps", "reason"]


@dataclass
class TrialResult:
    task_id: str
    controller: str
    budget: int
    trial: int
    seed: int
    perception: str
    outcome: str
    path_length: float
    steps: int
    wall_time: float = 0.0
    reason: str = ""
    trace: np.ndarray | None = None

    def row(self) -> dict:
        d = asdict(self)
        d.pop("trace")
        d.pop("wall_time")
        d["task"] = d.pop("task_id")
        return d


def step_cap(cfg: ExperimentConfig, task: NavigationTask) -> int:
    return max(int(math.ceil(cfg.step_cap_factor * task.path_length / cfg.expected_speed / cfg.control_period)), 1)


def run_episode(
    env: PolygonEnvironment,
    task: NavigationTask,
    controller: str,
    budget: int,
    seed: int,
    cfg: ExperimentConfig,
    trial: int = 0,
    keep_trace: bool = False,
) -> TrialResult:
    """Closed loop: sense, plan in the local frame, apply the first control for one period."""
    t0 = time.perf_counter()
    p = cfg.dynamics_params
    cp = cfg.cost_params
    ctrl = Controller(ControllerConfig(kind=controller, budget=budget, cost=cp, spec=cfg.spec, dynamics=p))
    state = np.array([*task.start, 0.0])
    goal = np.asarray(task.goal, dtype=float)
    trace = [state.copy()]
    length, outcome, reason = 0.0, "timeout", ""
    cap = step_cap(cfg, task)
    steps = 0
    while True:
        if math.hypot(*(state[:2] - goal)) <= cp.goal_tolerance:
            outcome = "success"
            break
        if steps >= cap:
            reason = "step cap reached"
            break
        try:
            per = perceive(env, state[:3], cfg.perception)
            local_goal = world_to_local(goal, state[:3])
            out = ctrl.step(state[3], local_goal, per, seed=int(np.random.SeedSequence([seed, steps]).generate_state(1)[0]))
        except Exception as exc:  # recorded as a failed trial
            reason = f"controller error: {exc}"
            break
        nxt = step_batch(state, out.control, p, cfg.control_period)
        length += math.hypot(*(nxt[:2] - state[:2]))
        state = nxt
        steps += 1
        trace.append(state.copy())
        if footprint_in_collision(state, env, cp.footprint_radius):
            outcome = "collision"
            break
    return TrialResult(
        task.task_id,
        controller,
        budget,
        trial,
        seed,
        cfg.perception,
        outcome,
        length,
        steps,
        time.perf_counter() - t0,
        reason,
        np.array(trace) if keep_trace else None,
    )


def run_navigation(cfg: ExperimentConfig, tasks: dict | None = None) -> tuple[ResultTable, list[TrialResult]]:
    table = ResultTable(NAVIGATION_COLUMNS)
    results = []
    for env_id, env in cfg.environments():
        try:
            env_tasks = tasks[env_id] if tasks else compute_navigation_tasks(env, cfg.footprint_radius, env_id)
        except ValueError as exc:
            log.warning("%s skipped: %s", env_id, exc)
            continue
        for task in env_tasks:
            for trial in range(cfg.trials_per_task):
                # shared across controllers so comparisons are paired
                seed = cfg.seed("navigation", env_id, task.index, trial)
                for budget in cfg.budgets:
                    for kind in cfg.controllers:
                        res = run_episode(env, task, kind, budget, seed, cfg, trial)
                        results.append(res)
                        table.add(**res.row())
    return table, results


# ---------------------------------------------------------------------------
# Summaries


def success_rates(table: ResultTable, key: str, value: str = "success") -> dict:
    out: dict = {}
    for r in table.rows:
        k = (r[key], r["budget"])
        hit = r["success"] if value == "success" else r["outcome"] == value
        out.setdefault(k, []).append(float(hit))
    return {f"{k[0]}@{k[1]}": float(np.mean(v)) for k, v in sorted(out.items())}


def navigation_summary(table: ResultTable) -> dict:
    groups: dict = {}
    for r in table.rows:
        groups.setdefault(f"{r['controller']}@{r['budget']}", []).append(r)
    out = {}
    for k, rows in sorted(groups.items()):
        counts = {o: sum(r["outcome"] == o for r in rows) for o in OUTCOMES}
        ok = [r["path_length"] for r in rows if r["outcome"] == "success"]
        out[k] = {
            "trials": len(rows),
            **counts,
            "success_rate": counts["success"] / len(rows),
            "avg_path_length": float(np.mean(ok)) if ok else float("nan"),
        }
    return out


def uniformity_summary(table: ResultTable) -> dict:
    out = {}
    for kind in dict.fromkeys(table.column("sampler")):
        rows = table.where(sampler=kind)
        out[kind] = {
            "maps": len(rows),
            "avg_kl": float(np.nanmean([r["avg_kl"] for r in rows])),
            "collision_free_ratio": float(np.mean([r["collision_free_ratio"] for r in rows])),
            "avg_entropy_ratio": float(np.nanmean([r["avg_entropy_ratio"] for r in rows])),
        }
    return out


def paired_bootstrap_ci(diffs, n_boot: int = 2000, seed: int = 0, level: float = 0.95) -> tuple[float, float]:
    """Percentile interval of the mean of paired differences."""
    d = np.asarray(diffs, dtype=float)
    d = d[~np.isnan(d)]
    rng = np.random.default_rng(seed)
    means = d[rng.integers(0, len(d), (n_boot, len(d)))].mean(axis=1)
    lo, hi = np.quantile(means, [(1 - level) / 2, 1 - (1 - level) / 2])
    return float(lo), float(hi)


def write_outputs(table: ResultTable, summary: dict, out_dir: str | Path, stem: str) -> tuple[Path, Path]:
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    csv_path, json_path = out / f"{stem}.csv", out / f"{stem}.json"
    table.write_csv(csv_path)
    json_path.write_text(json.dumps(summary, indent=2, sort_keys=True))
    return csv_path, json_path
