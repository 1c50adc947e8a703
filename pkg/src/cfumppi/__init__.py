"""Collision-free uniform trajectory sampling for MPPI-style navigation."""
from .dynamics import Control, DynamicsParams, State, Trajectory, rollout, step
from .env import LocalPerception, PolygonEnvironment, generate_cluttered_environment
from .flowpolicy import FlowPolicy, compute_cfu_policy, compute_cuniform_policy
from .levelsets import DiscretizationSpec, NoSafeHorizonError, SafeLevelSets

__version__ = "0.1.0"

__all__ = [
    "Control",
    "DiscretizationSpec",
    "DynamicsParams",
    "FlowPolicy",
    "LocalPerception",
    "NoSafeHorizonError",
    "PolygonEnvironment",
    "SafeLevelSets",
    "State",
    "Trajectory",
    "compute_cfu_policy",
    "compute_cuniform_policy",
    "generate_cluttered_environment",
    "rollout",
    "step",
]
