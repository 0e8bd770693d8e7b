"""Domain exceptions.

Invalid-argument conditions raise plain ValueError; everything that can
abort a simulation or a pipeline gets its own class so callers can react
(e.g. a sweep tabulating per-point failures).
"""


class SdmError(Exception):
    """Base class for all package-specific errors."""


class GridMismatchError(SdmError, ValueError):
    """Two series/states that must share a grid do not."""


class DegenerateTargetError(SdmError, ValueError):
    """The target signal has zero norm and cannot be tracked against."""


class DomainTooSmallError(SdmError):
    """A bound state leaks out of the requested eigensolve box."""


class CalibrationError(SdmError):
    """Root bracketing for the softening parameter failed."""


class CorruptedStateError(SdmError):
    """A state violates its norm/trace/mass invariant beyond tolerance."""


class BoxOverflowError(SdmError):
    """Probability density reached the simulation box boundary."""

    def __init__(self, message: str, t: float | None = None, leak: float | None = None):
        super().__init__(message)
        self.t = t
        self.leak = leak


class StepperInstabilityError(SdmError):
    """A propagator violated its per-step conservation bound."""


class TrajectoryOverflowError(SdmError):
    """A classical trajectory produced a non-finite value."""

    def __init__(self, message: str, index: int):
        super().__init__(message)
        self.index = index


class IncompatibleTargetError(SdmError):
    """Initial dipole/derivative of the system does not match the target."""

    def __init__(self, message: str, position_gap: float, momentum_gap: float):
        super().__init__(message)
        self.position_gap = position_gap
        self.momentum_gap = momentum_gap


class ConfigError(SdmError, ValueError):
    """Scenario configuration is malformed (unknown keys, bad ranges, ...)."""
