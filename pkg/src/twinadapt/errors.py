"""Exception types shared across the package."""

from __future__ import annotations


class TwinAdaptError(Exception):
    """Base class for all package-specific errors."""


class DuplicateIdError(TwinAdaptError):
    """A model id is already registered in the pool."""


class InvalidDescriptorError(TwinAdaptError):
    """A model descriptor violates one of its invariants."""


class UnknownModelIdError(TwinAdaptError):
    """A configuration references a model id the pool does not know."""


class UnsupportedDepthError(TwinAdaptError):
    """Instantiation requested for a metadata-only depth (4 or 5)."""


class ParamOutOfBoundsError(TwinAdaptError):
    """A parameter value lies outside its declared tunable bounds."""

    def __init__(self, name: str, value: float, lower: float, upper: float):
        super().__init__(
            f"parameter {name!r} = {value} outside bounds [{lower}, {upper}]"
        )
        self.name = name
        self.value = value
        self.lower = lower
        self.upper = upper


class AlgebraicLoopError(TwinAdaptError):
    """The coupling graph contains a cycle; composition refuses it."""


class NoSuitableCandidateError(TwinAdaptError):
    """Candidate enumeration found nothing satisfying the constraints."""


class WindowMismatchError(TwinAdaptError):
    """Two traces being compared do not cover the same window."""


class NumericalFailureError(TwinAdaptError):
    """A simulation produced a non-finite state value."""

    def __init__(self, signal: str, t: float):
        super().__init__(f"non-finite value on signal {signal!r} at t={t}")
        self.signal = signal
        self.t = t


class SimulationFailureError(TwinAdaptError):
    """A fit objective evaluation failed; carries the offending point."""

    def __init__(self, message: str, params: dict | None = None):
        super().__init__(message)
        self.params = dict(params or {})


class InvalidScenarioError(TwinAdaptError):
    """A plant scenario file or object violates its invariants."""


class UnknownParameterError(TwinAdaptError):
    """A fault injection names a parameter the plant does not have."""


class ProtocolError(TwinAdaptError):
    """A remote-model wire message is malformed; names the offending field."""


class RemoteSimulationError(TwinAdaptError):
    """The remote endpoint reported a simulation failure."""


class UnreachableError(TwinAdaptError):
    """The remote endpoint could not be connected."""


class RemoteTimeoutError(TwinAdaptError):
    """The remote endpoint did not answer within the deadline."""


class ActivationConflictError(TwinAdaptError):
    """Two adaptation cycles tried to commit concurrently."""


class ConfigError(TwinAdaptError):
    """A configuration file is missing or malformed."""
