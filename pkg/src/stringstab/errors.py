"""Exception hierarchy shared across the package."""


class StringstabError(Exception):
    """Base class for all package errors."""


class ConfigError(StringstabError):
    """Invalid or malformed scenario configuration."""


class GapCollisionError(StringstabError):
    """Non-positive net gap passed to the car-following law."""


class NoEquilibriumError(StringstabError):
    """No equilibrium gap exists for the requested speed."""


class SamplingInfeasibleError(StringstabError):
    """Truncation box carries negligible probability mass."""


class CollisionError(StringstabError):
    """A simulated vehicle reached zero net gap."""

    def __init__(self, time: float, vehicle: int):
        super().__init__(f"collision at t={time:.3f}s, vehicle {vehicle}")
        self.time = time
        self.vehicle = vehicle


class NumericalFailureError(StringstabError):
    """NaN state or eigensolver non-convergence."""


class SystemSizeError(StringstabError):
    """Heterogeneous closed system too large for the dense eigensolver."""


class OptimizationFailedError(StringstabError):
    """No feasible candidate found during optimisation."""
