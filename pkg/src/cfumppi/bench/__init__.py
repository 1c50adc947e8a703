"""Experiment harnesses, task generation and the command-line interface."""
from .config import ExperimentConfig, stable_seed
from .experiments import (
    ResultTable,
    TrialResult,
    run_episode,
    run_navigation,
    run_scaling,
    run_single_frame,
    run_uniformity,
)
from .tasks import NavigationTask, a_star, compute_navigation_tasks

__all__ = [
    "ExperimentConfig",
    "NavigationTask",
    "ResultTable",
    "TrialResult",
    "a_star",
    "compute_navigation_tasks",
    "run_episode",
    "run_navigation",
    "run_scaling",
    "run_single_frame",
    "run_uniformity",
    "stable_seed",
]
