"""Executable behavior models, composition, and remote execution."""

from .base import IMPLEMENTATIONS, ModelInstance, StepResult, instantiate, register_implementation
from .composite import DEFAULT_DT, CompositeModel, compose, simulate_single, topological_slots
from .remote import remote_simulate

# importing the implementations registers them
from . import conveyor as _conveyor  # noqa: F401
from . import gripper as _gripper  # noqa: F401

__all__ = [
    "IMPLEMENTATIONS",
    "ModelInstance",
    "StepResult",
    "instantiate",
    "register_implementation",
    "CompositeModel",
    "compose",
    "simulate_single",
    "topological_slots",
    "remote_simulate",
    "DEFAULT_DT",
]
