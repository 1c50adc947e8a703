"""Ordering checks over experiment result tables."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .experiments import ResultTable, paired_bootstrap_ci

# average-KL ordering of the compared samplers, lowest first
KL_ORDER = ("cfu", "cuniform", "logmppi", "mppi")
SUCCESS_ORDER = ("cfu", "cuniform", "logmppi", "mppi")


@dataclass
class Check:
    name: str
    passed: bool
    detail: str = ""

    def line(self) -> str:
        return f"{'PASS' if self.passed else 'FAIL'} {self.name}: {self.detail}"


def _paired(table: ResultTable, metric: str, a: str, b: str) -> np.ndarray:
    key = lambda r: (r["env"], r["pose"])
    va = {key(r): r[metric] for r in table.where(sampler=a)}
    vb = {key(r): r[metric] for r in table.where(sampler=b)}
    common = sorted(set(va) & set(vb))
    return np.array([vb[k] - va[k] for k in common], dtype=float)


def uniformity_checks(table: ResultTable, seed: int = 0) -> list[Check]:
    """Paired KL ordering and collision-free dominance, each with a 95% bootstrap interval excluding zero."""
    out = []
    present = [k for k in KL_ORDER if table.where(sampler=k)]
    for lo, hi in zip(present, present[1:]):
        d = _paired(table, "avg_kl", lo, hi)
        ci = paired_bootstrap_ci(d, seed=seed)
        out.append(Check(f"kl {lo} < {hi}", ci[0] > 0, f"mean diff {np.nanmean(d):.4f}, 95% CI [{ci[0]:.4f}, {ci[1]:.4f}], n={len(d)}"))
    if "cfu" in present:
        for other in present:
            if other == "cfu":
                continue
            d = -_paired(table, "collision_free_ratio", "cfu", other)
            ci = paired_bootstrap_ci(d, seed=seed)
            out.append(Check(f"collision-free cfu > {other}", ci[0] > 0, f"mean diff {d.mean():.4f}, 95% CI [{ci[0]:.4f}, {ci[1]:.4f}]"))
    return out


def single_frame_checks(table: ResultTable, budget: int = 512) -> list[Check]:
    out = []
    rate = {}
    for kind in SUCCESS_ORDER:
        rows = table.where(sampler=kind, budget=budget)
        if rows:
            rate[kind] = float(np.mean([r["success"] for r in rows]))
    present = [k for k in SUCCESS_ORDER if k in rate]
    for hi, lo in zip(present, present[1:]):
        out.append(Check(f"success@{budget} {hi} > {lo}", rate[hi] > rate[lo], f"{rate[hi]:.3f} vs {rate[lo]:.3f}"))
    budgets = sorted(set(table.column("budget")))
    for kind in present:
        by_trial: dict = {}
        for r in table.where(sampler=kind):
            by_trial.setdefault((r["env"], r["trial"]), {})[r["budget"]] = r["success"]
        mono = all(all(s[a] <= s[b] for a, b in zip(budgets, budgets[1:])) for s in by_trial.values())
        rates = [np.mean([r["success"] for r in table.where(sampler=kind, budget=b)]) for b in budgets]
        out.append(Check(f"{kind} success monotone in budget", mono, " ".join(f"{b}:{x:.3f}" for b, x in zip(budgets, rates))))
    return out


def navigation_checks(table: ResultTable, budget: int = 512, gap: float = 0.10) -> list[Check]:
    def rate(kind):
        rows = [r for r in table.rows if r["controller"] == kind and r["budget"] == budget]
        return float(np.mean([r["outcome"] == "success" for r in rows])) if rows else float("nan"), len(rows)

    (c, nc), (m, nm) = rate("cfu-mppi"), rate("mppi")
    out = [Check(f"cfu-mppi beats mppi by >= {gap:.0%} at {budget}", c - m >= gap, f"{c:.3f} ({nc} trials) vs {m:.3f} ({nm} trials)")]
    counts_ok = all(r["outcome"] in ("success", "collision", "timeout") for r in table.rows)
    out.append(Check("outcomes exclusive", counts_ok, f"{len(table.rows)} trials"))
    return out


def scaling_checks(table: ResultTable) -> list[Check]:
    out = []
    for setting in dict.fromkeys(table.column("setting")):
        cfu = [r["avg_kl"] for r in table.where(setting=setting, sampler="cfu")]
        cu = [r["avg_kl"] for r in table.where(setting=setting, sampler="cuniform")]
        if cfu and cu:
            a, b = float(np.nanmean(cfu)), float(np.nanmean(cu))
            out.append(Check(f"{setting}: kl cfu < cuniform", a < b, f"{a:.4f} vs {b:.4f}"))
    return out
