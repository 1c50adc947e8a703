"""Command-line interface."""
from __future__ import annotations

import argparse
import json
import logging
import sys
from pathlib import Path

import numpy as np

from ..controller import CONTROLLER_KINDS, Controller, ControllerConfig
from ..env import GenerationError, GenerationSpec, PolygonEnvironment, generate_cluttered_environment, local_to_world, world_to_local
from ..flowpolicy import compute_cfu_policy
from ..levelsets import NoSafeHorizonError, SafeLevelSets
from ..metrics import uniformity_report
from ..samplers import SAMPLER_KINDS, TrajectoryBatch, sample_named
from . import checks
from .config import PERCEPTION_MODES, ExperimentConfig
from .experiments import (
    NavigationTask,
    navigation_summary,
    perceive,
    run_episode,
    run_navigation,
    run_scaling,
    run_single_frame,
    run_uniformity,
    success_rates,
    uniformity_summary,
    write_outputs,
)
from .svg import local_snapshot, world_snapshot
from .tasks import compute_navigation_tasks


def _floats(text: str, n: int | None = None) -> tuple[float, ...]:
    vals = tuple(float(v) for v in text.split(","))
    if n is not None and len(vals) != n:
        raise argparse.ArgumentTypeError(f"expected {n} comma-separated numbers, got {text!r}")
    return vals


def _write_json(path, data) -> None:
    Path(path).write_text(json.dumps(data, indent=2))


def cmd_gen_env(a) -> int:
    env = generate_cluttered_environment(a.seed, GenerationSpec(footprint_radius=a.footprint_radius))
    env.save(a.out)
    if a.svg:
        world_snapshot(env).save(a.svg)
    return 0


def cmd_policy(a) -> int:
    env = PolygonEnvironment.load(a.env)
    per = perceive(env, _floats(a.pose, 3), a.perception)
    safe, policy = compute_cfu_policy(per, footprint_radius=a.footprint_radius)
    policy.save(a.out)
    if a.levelsets:
        _write_json(a.levelsets, safe.to_dict())
    return 0


def cmd_sample(a) -> int:
    env = PolygonEnvironment.load(a.env)
    per = perceive(env, _floats(a.pose, 3), a.perception)
    batch = sample_named(a.sampler, per, a.budget, a.seed, footprint_radius=a.footprint_radius)
    batch.save(a.out)
    if a.levelsets:
        safe, _ = compute_cfu_policy(per, footprint_radius=a.footprint_radius)
        _write_json(a.levelsets, safe.to_dict())
    if a.svg:
        local_snapshot(per, batch.states).save(a.svg)
    return 0


def cmd_metrics(a) -> int:
    batch = TrajectoryBatch.load(a.batch)
    safe = SafeLevelSets.from_dict(json.loads(Path(a.levelsets).read_text()))
    rep = uniformity_report(batch, safe, batch.sampler, a.seed)
    rep.save(a.out)
    rep.write_csv(a.csv or str(Path(a.out).with_suffix(".csv")))
    print(f"avg KL {rep.avg_kl:.4f}  collision-free {rep.collision_free_ratio:.4f}  entropy ratio {rep.avg_entropy_ratio:.4f}")
    return 0


def cmd_plan(a) -> int:
    env = PolygonEnvironment.load(a.env)
    start = _floats(a.start, 4)
    goal = np.array(_floats(a.goal, 2))
    per = perceive(env, start[:3], a.perception)
    ctrl = Controller(ControllerConfig(kind=a.controller, budget=a.budget))
    out = ctrl.step(start[3], world_to_local(goal, start[:3]), per, a.seed)
    d = out.diagnostics
    chosen_world = local_to_world(d["chosen_states"][:, :2], start[:3])
    result = {
        "controller": a.controller,
        "budget": a.budget,
        "control": out.control.tolist(),
        "nominal": out.nominal.tolist(),
        "chosen_path_world": chosen_world.tolist(),
        "diagnostics": {k: v for k, v in d.items() if isinstance(v, (int, float, str, bool))},
    }
    _write_json(a.out, result)
    if a.svg:
        samples = d["init_samples"] if d["init_samples"] is not None else d["samples"]
        world_samples = [local_to_world(s[:, :2], start[:3]) for s in samples]
        world_snapshot(env, samples=world_samples, chosen=chosen_world, goal=goal).save(a.svg)
    return 0


def cmd_navigate(a) -> int:
    env = PolygonEnvironment.load(a.env)
    cfg = ExperimentConfig(env_count=0, perception=a.perception, budgets=[a.budget], controllers=[a.controller])
    if a.start and a.goal:
        s, g = _floats(a.start, 3), _floats(a.goal, 2)
        length = float(np.hypot(g[0] - s[0], g[1] - s[1]))
        task = NavigationTask(Path(a.env).stem, 0, s, g, length)
    else:
        task = compute_navigation_tasks(env, cfg.footprint_radius, Path(a.env).stem)[a.task]
    res = run_episode(env, task, a.controller, a.budget, a.seed, cfg, keep_trace=True)
    row = res.row()
    row["wall_time"] = res.wall_time
    _write_json(a.out, {"task": task.to_dict(), "result": row, "trace": res.trace.tolist()})
    if a.svg:
        world_snapshot(env, trace=res.trace, goal=task.goal).save(a.svg)
    print(f"{res.outcome} after {res.steps} steps, path {res.path_length:.2f} m")
    return 0


def cmd_bench(a) -> int:
    cfg = ExperimentConfig.load(a.config)
    out_dir = a.out_dir or cfg.output_dir
    if a.kind == "uniformity":
        table = run_uniformity(cfg)
        summary, found = uniformity_summary(table), checks.uniformity_checks(table)
    elif a.kind == "single-frame":
        table = run_single_frame(cfg)
        summary, found = success_rates(table, "sampler"), checks.single_frame_checks(table, max(cfg.budgets))
    elif a.kind == "scaling":
        table = run_scaling(cfg)
        summary, found = {}, checks.scaling_checks(table)
    else:
        table, _ = run_navigation(cfg)
        summary, found = navigation_summary(table), checks.navigation_checks(table, max(cfg.budgets))
    summary = {"results": summary, "checks": [c.__dict__ for c in found], "config": cfg.to_dict()}
    csv_path, json_path = write_outputs(table, summary, out_dir, a.kind)
    for c in found:
        print(c.line())
    print(f"wrote {csv_path} and {json_path}")
    if a.check and not all(c.passed for c in found):
        return 1
    return 0


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="cfumppi", description="Collision-free uniform sampling for MPPI navigation")
    ap.add_argument("-v", "--verbose", action="store_true")
    sub = ap.add_subparsers(dest="command", required=True)

    p = sub.add_parser("gen-env", help="generate a cluttered polygon world")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", required=True)
    p.add_argument("--svg")
    p.add_argument("--footprint-radius", type=float, default=0.3)
    p.set_defaults(func=cmd_gen_env)

    def add_frame(p):
        p.add_argument("--env", required=True)
        p.add_argument("--pose", required=True, help="x,y,theta in the world frame")
        p.add_argument("--perception", choices=PERCEPTION_MODES, default="simulated-lidar")
        p.add_argument("--footprint-radius", type=float, default=0.3)

    p = sub.add_parser("policy", help="compute the max-flow policy for one local map")
    add_frame(p)
    p.add_argument("--out", required=True)
    p.add_argument("--levelsets")
    p.set_defaults(func=cmd_policy)

    p = sub.add_parser("sample", help="sample a trajectory batch in the robot frame")
    add_frame(p)
    p.add_argument("--sampler", choices=SAMPLER_KINDS, required=True)
    p.add_argument("--budget", type=int, default=512)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", required=True)
    p.add_argument("--levelsets")
    p.add_argument("--svg")
    p.set_defaults(func=cmd_sample)

    p = sub.add_parser("metrics", help="uniformity metrics for a saved batch")
    p.add_argument("--batch", required=True)
    p.add_argument("--levelsets", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--csv")
    p.add_argument("--seed", type=int, default=0)
    p.set_defaults(func=cmd_metrics)

    p = sub.add_parser("plan", help="one control cycle from a world state")
    p.add_argument("--controller", choices=CONTROLLER_KINDS, default="cfu-mppi")
    p.add_argument("--budget", type=int, default=512)
    p.add_argument("--env", required=True)
    p.add_argument("--start", required=True, help="x,y,theta,v")
    p.add_argument("--goal", required=True, help="x,y")
    p.add_argument("--perception", choices=PERCEPTION_MODES, default="simulated-lidar")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", required=True)
    p.add_argument("--svg")
    p.set_defaults(func=cmd_plan)

    p = sub.add_parser("navigate", help="closed-loop episode")
    p.add_argument("--controller", choices=CONTROLLER_KINDS, default="cfu-mppi")
    p.add_argument("--budget", type=int, default=512)
    p.add_argument("--env", required=True)
    p.add_argument("--start", help="x,y,theta (defaults to the longest-path task)")
    p.add_argument("--goal", help="x,y")
    p.add_argument("--task", type=int, default=0)
    p.add_argument("--perception", choices=PERCEPTION_MODES, default="simulated-lidar")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", required=True)
    p.add_argument("--svg")
    p.set_defaults(func=cmd_navigate)

    p = sub.add_parser("bench", help="run an experiment from a JSON config")
    p.add_argument("kind", choices=("uniformity", "single-frame", "scaling", "navigation"))
    p.add_argument("--config", required=True)
    p.add_argument("--out-dir")
    p.add_argument("--check", action="store_true", help="exit nonzero if an ordering check fails")
    p.set_defaults(func=cmd_bench)
    return ap


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s %(message)s")
    try:
        return args.func(args)
    except (ValueError, NoSafeHorizonError, GenerationError, OSError) as exc:
        # bad poses, unusable maps and missing files are user errors, not crashes
        print(f"cfumppi: error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
