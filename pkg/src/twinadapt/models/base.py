"""Executable model-instance contract and instantiation dispatch.

A ModelInstance is a deterministic state machine stepped over macro
intervals. Inputs arrive as exact-timestamped events per in-port; outputs
are exact-timestamped events and samples per out-port. Port *names* carry
the behavioral role (e.g. a gripper needs an ``item_in`` port); port
*signal tags* are free metadata chosen by the descriptor, so the same
implementation can be wired under different signal names.
"""

from __future__ import annotations

from abc import ABC, abstractmethod
from dataclasses import dataclass, field

from ..errors import (
    InvalidDescriptorError,
    ParamOutOfBoundsError,
    UnsupportedDepthError,
)
from ..pool import ModelDescriptor


@dataclass
class StepResult:
    """Outputs produced during one macro step, keyed by out-port name."""

    events: list[tuple[str, float, float]] = field(default_factory=list)  # (port, t, value)
    samples: list[tuple[str, float, float]] = field(default_factory=list)


class ModelInstance(ABC):
    """Deterministic executable model bound to a descriptor + parameters."""

    #: port names the implementation requires on its descriptor
    required_ports: tuple[str, ...] = ()

    def __init__(self, descriptor: ModelDescriptor, params: dict[str, float]):
        self.descriptor = descriptor
        self.params = resolve_params(descriptor, params)
        missing = [p for p in self.required_ports if descriptor.port(p) is None]
        if missing:
            raise InvalidDescriptorError(
                f"model {descriptor.id!r} lacks required port(s) {missing} "
                f"for implementation {type(self).__name__}"
            )
        self.reset()

    @abstractmethod
    def reset(self) -> None:
        """Return to the initial state; the parameter assignment persists."""

    @abstractmethod
    def step(
        self, t: float, t_end: float, inputs: dict[str, list[tuple[float, float]]]
    ) -> StepResult:
        """Advance over [t, t_end); inputs are events per in-port name."""

    def dispose(self) -> None:
        """Release resources; the default implementation resets."""
        self.reset()


def resolve_params(
    descriptor: ModelDescriptor, params: dict[str, float]
) -> dict[str, float]:
    """Validate a parameter assignment and fill missing values with nominals."""
    resolved = descriptor.nominal_params()
    for name, value in params.items():
        tun = descriptor.tunable(name)
        if tun is None:
            raise ParamOutOfBoundsError(name, value, float("nan"), float("nan"))
        if not (tun.lower <= value <= tun.upper):
            raise ParamOutOfBoundsError(name, value, tun.lower, tun.upper)
        resolved[name] = float(value)
    return resolved


# (slot, depth) -> implementation class; tests may add entries.
IMPLEMENTATIONS: dict[tuple[str, int], type[ModelInstance]] = {}


def register_implementation(slot: str, depth: int, cls: type[ModelInstance]) -> None:
    IMPLEMENTATIONS[(slot, depth)] = cls


def instantiate(descriptor: ModelDescriptor, params: dict[str, float] | None = None) -> ModelInstance:
    """Create an executable instance for a descriptor.

    Depths 4 and 5 are metadata-only and refuse instantiation; parameters
    outside their declared bounds are rejected, missing ones default to the
    tunable's nominal value.
    """
    if descriptor.depth not in (1, 2, 3):
        raise UnsupportedDepthError(
            f"model {descriptor.id!r} has depth {descriptor.depth}; only depths "
            f"1-3 are executable"
        )
    cls = IMPLEMENTATIONS.get((descriptor.slot, descriptor.depth))
    if cls is None:
        raise InvalidDescriptorError(
            f"no executable implementation for slot {descriptor.slot!r} "
            f"at depth {descriptor.depth}"
        )
    return cls(descriptor, dict(params or {}))
