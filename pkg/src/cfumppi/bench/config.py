"""Experiment configuration and seed derivation."""
from __future__ import annotations

import hashlib
import json
from dataclasses import asdict, dataclass, field, fields
from pathlib import Path

from ..controller import CostParams
from ..dynamics import DynamicsParams
from ..env import DEFAULT_FOOTPRINT_RADIUS, GenerationSpec, PolygonEnvironment, generate_cluttered_environment
from ..levelsets import DiscretizationSpec

PERCEPTION_MODES = ("simulated-lidar", "oracle-local-map")


def stable_seed(*parts) -> int:
    """63-bit seed from identifiers; independent of the interpreter's hash salt."""
    text = "\x1f".join(str(p) for p in parts)
    return int.from_bytes(hashlib.sha256(text.encode()).digest()[:8], "little") >> 1


@dataclass
class ScaledSetting:
    name: str
    v: float = 2.5
    dt: float = 0.2
    horizon: int = 6


DEFAULT_SCALINGS = [
    ScaledSetting("nominal", 2.5, 0.2, 6),
    ScaledSetting("scale-v", 1.25, 0.2, 6),
    ScaledSetting("scale-dt", 2.5, 0.1, 12),
    ScaledSetting("scale-v-dt-T", 1.25, 0.1, 24),
]


@dataclass
class ExperimentConfig:
    name: str = "experiment"
    master_seed: int = 0
    env_files: list[str] = field(default_factory=list)
    env_count: int = 50
    env_seed_offset: int = 0
    samplers: list[str] = field(default_factory=lambda: ["cfu", "cuniform", "logmppi", "mppi"])
    controllers: list[str] = field(default_factory=lambda: ["cfu-mppi", "mppi"])
    budgets: list[int] = field(default_factory=lambda: [512])
    uniformity_budget: int = 2000
    perception: str = "oracle-local-map"
    poses_per_env: int = 5
    trials_per_map: int = 10
    trials_per_task: int = 3
    footprint_radius: float = DEFAULT_FOOTPRINT_RADIUS
    control_period: float = 0.1
    expected_speed: float = 1.5
    step_cap_factor: float = 4.0
    discretization: dict = field(default_factory=dict)
    dynamics: dict = field(default_factory=dict)
    cost: dict = field(default_factory=dict)
    generation: dict = field(default_factory=dict)
    scalings: list[dict] = field(default_factory=lambda: [asdict(s) for s in DEFAULT_SCALINGS])
    output_dir: str = "results"

    def __post_init__(self):
        if self.perception not in PERCEPTION_MODES:
            raise ValueError(f"perception must be one of {PERCEPTION_MODES}")
        if min(self.budgets, default=1) < 1 or self.uniformity_budget < 1:
            raise ValueError("budgets must be positive")
        if self.env_count < 0 or self.poses_per_env < 1 or self.trials_per_map < 1 or self.trials_per_task < 1:
            raise ValueError("counts must be positive")
        missing = [f for f in self.env_files if not Path(f).exists()]
        if missing:
            raise FileNotFoundError(f"environment files not found: {missing}")

    @property
    def spec(self) -> DiscretizationSpec:
        return DiscretizationSpec.from_dict(self.discretization) if self.discretization else DiscretizationSpec()

    @property
    def dynamics_params(self) -> DynamicsParams:
        return DynamicsParams(**self.dynamics)

    @property
    def cost_params(self) -> CostParams:
        return CostParams(**{"footprint_radius": self.footprint_radius, **self.cost})

    @property
    def scaled_settings(self) -> list[ScaledSetting]:
        return [ScaledSetting(**s) for s in self.scalings]

    def environments(self) -> list[tuple[str, PolygonEnvironment]]:
        out = [(Path(f).stem, PolygonEnvironment.load(f)) for f in self.env_files]
        gen = GenerationSpec(**{"footprint_radius": self.footprint_radius, **self.generation})
        for i in range(self.env_count):
            seed = self.env_seed_offset + i
            out.append((f"gen{seed:04d}", generate_cluttered_environment(seed, gen)))
        return out

    def seed(self, *parts) -> int:
        return stable_seed(self.name, self.master_seed, *parts)

    def to_dict(self) -> dict:
        return asdict(self)

    @classmethod
    def from_dict(cls, d: dict) -> "ExperimentConfig":
        known = {f.name for f in fields(cls)}
        unknown = set(d) - known
        if unknown:
            raise ValueError(f"unknown config keys: {sorted(unknown)}")
        return cls(**d)

    @classmethod
    def load(cls, path: str | Path) -> "ExperimentConfig":
        return cls.from_dict(json.loads(Path(path).read_text()))

    def save(self, path: str | Path) -> None:
        Path(path).write_text(json.dumps(self.to_dict(), indent=2))
