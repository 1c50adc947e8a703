"""Uniformity metrics over per-level cell histograms."""
from __future__ import annotations

import csv
import json
import math
from dataclasses import asdict, dataclass, field
from pathlib import Path

import numpy as np

from .levelsets import DiscretizationSpec, SafeLevelSets, cell_keys

DEFAULT_EPSILON = 1e-6
OFF_GRID_KEY = -1


@dataclass
class CellDistribution:
    keys: np.ndarray  # (n,) unique sorted cell keys; -1 collects off-grid states
    mass: np.ndarray  # (n,) sums to 1 unless empty
    counts: np.ndarray | None = None
    total: int = 0

    @property
    def empty(self) -> bool:
        return len(self.keys) == 0

    def as_dict(self) -> dict[int, float]:
        return dict(zip(self.keys.tolist(), self.mass.tolist()))


def target_distribution(safe: SafeLevelSets, t: int) -> CellDistribution:
    keys = np.unique(safe.levels[t].keys)
    if len(keys) == 0:
        raise ValueError(f"level {t} is empty; the target measure is undefined")
    return CellDistribution(keys, np.full(len(keys), 1.0 / len(keys)), None, len(keys))


def surviving(first_collision: np.ndarray, t: int) -> np.ndarray:
    """Trajectories that have not collided at or before state index ``t``."""
    return (first_collision < 0) | (first_collision > t)


def empirical_distribution(batch, spec: DiscretizationSpec, t: int) -> CellDistribution:
    if t > batch.horizon:
        raise ValueError(f"batch horizon {batch.horizon} is shorter than level {t}")
    alive = surviving(batch.first_collision, t)
    keys, _ = cell_keys(batch.states[alive, t, :3], spec)
    if len(keys) == 0:
        return CellDistribution(np.zeros(0, dtype=np.int64), np.zeros(0), np.zeros(0, dtype=np.int64), 0)
    uniq, counts = np.unique(keys, return_counts=True)
    return CellDistribution(uniq, counts / counts.sum(), counts, int(counts.sum()))


def kl_uniformity(q: CellDistribution, target: CellDistribution, epsilon: float = DEFAULT_EPSILON) -> float:
    """KL(q || smoothed target) in nats over the union of both supports."""
    universe = np.union1d(q.keys, target.keys)
    p = np.zeros(len(universe))
    p[np.searchsorted(universe, target.keys)] = target.mass
    p = (p + epsilon) / (p.sum() + epsilon * len(universe))
    qq = np.zeros(len(universe))
    qq[np.searchsorted(universe, q.keys)] = q.mass
    nz = qq > 0
    return float(np.sum(qq[nz] * np.log(qq[nz] / p[nz])))


def entropy(mass: np.ndarray) -> float:
    m = np.asarray(mass, dtype=float)
    m = m[m > 0]
    return float(-np.sum(m * np.log(m)))


def entropy_ratio(q: CellDistribution | np.ndarray, level_size: int) -> float:
    if level_size < 1:
        raise ValueError("level_size must be at least 1")
    if level_size == 1:
        return 1.0
    mass = q.mass if isinstance(q, CellDistribution) else q
    # more occupied cells than the level holds can exceed ln(level_size)
    return min(max(entropy(mass) / math.log(level_size), 0.0), 1.0)


def collision_free_ratio(batch) -> float:
    return float(1.0 - np.mean(batch.collided)) if len(batch) else float("nan")


@dataclass
class UniformityReport:
    sampler: str
    budget: int
    seed: int
    kl: list[float]
    entropy_ratio: list[float]
    collision_free_ratio: float
    level_sizes: list[int]
    survivors: list[int]
    levels: list[int] = field(default_factory=list)
    metadata: dict = field(default_factory=dict)

    @property
    def avg_kl(self) -> float:
        return _nanmean(self.kl)

    @property
    def avg_entropy_ratio(self) -> float:
        return _nanmean(self.entropy_ratio)

    def to_dict(self) -> dict:
        d = asdict(self)
        d["avg_kl"] = self.avg_kl
        d["avg_entropy_ratio"] = self.avg_entropy_ratio
        return d

    def save(self, path: str | Path) -> None:
        Path(path).write_text(json.dumps(self.to_dict(), indent=2))

    def write_csv(self, path: str | Path) -> None:
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["sampler", "budget", "seed", "level", "level_size", "survivors", "kl", "entropy_ratio"])
            levels = self.levels or range(1, len(self.kl) + 1)
            for i, (t, k, e) in enumerate(zip(levels, self.kl, self.entropy_ratio)):
                w.writerow([self.sampler, self.budget, self.seed, t, self.level_sizes[i], self.survivors[i], repr(k), repr(e)])


def _nanmean(xs) -> float:
    a = np.asarray(xs, dtype=float)
    a = a[~np.isnan(a)]
    return float(a.mean()) if len(a) else float("nan")


def uniformity_report(
    batch,
    safe: SafeLevelSets,
    sampler: str = "",
    seed: int = 0,
    epsilon: float = DEFAULT_EPSILON,
    levels: range | None = None,
) -> UniformityReport:
    """Per-level metrics for levels ``1..N`` (level 0 is a single cell).

    Levels whose histogram is empty (every rollout already collided) report NaN
    and are left out of the averages.
    """
    levels = levels if levels is not None else range(1, min(len(safe) - 1, batch.horizon) + 1)
    kls, ers, sizes, alive = [], [], [], []
    for t in levels:
        target = target_distribution(safe, t)
        q = empirical_distribution(batch, safe.spec, t)
        sizes.append(len(target.keys))
        alive.append(q.total)
        if q.empty:
            kls.append(float("nan"))
            ers.append(float("nan"))
            continue
        kls.append(kl_uniformity(q, target, epsilon))
        ers.append(entropy_ratio(q, len(target.keys)))
    return UniformityReport(sampler, len(batch), seed, kls, ers, collision_free_ratio(batch), sizes, alive, list(levels))
