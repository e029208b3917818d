"""
Exception types raised by the tissue growth solver.
"""
from typing import Optional


class TissueGrowthError(Exception):
    """Base class for every error raised by the package."""


class GridError(TissueGrowthError, ValueError):
    """Invalid grid geometry or a field that does not match its grid."""


class NegativeFieldError(TissueGrowthError, ValueError):
    """A density, pressure or fraction field went negative."""


class LocalizerExceedsBox(TissueGrowthError, ValueError):
    """The localizing function would be clipped by the computational box."""


class FloorBreaksHomeostatic(TissueGrowthError, ValueError):
    """Adding the Gaussian floor pushes the initial pressure above P_H."""


class AssumptionsViolated(TissueGrowthError):
    """The reaction model fails the structural assumptions and no override was given."""

    def __init__(self, message: str, report=None):
        super().__init__(message)
        self.report = report


class StepRejected(TissueGrowthError):
    """A time step broke the pressure maximum principle; retry with a smaller dt."""

    def __init__(self, message: str, p_max: float):
        super().__init__(message)
        self.p_max = p_max


class Diverged(TissueGrowthError):
    """Step retries shrank dt below the admissible minimum."""

    def __init__(self, message: str, t: float, dt: float):
        super().__init__(message)
        self.t = t
        self.dt = dt


class ConfigError(TissueGrowthError):
    """Malformed configuration text."""

    def __init__(self, message: str, line: Optional[int] = None):
        self.line = line
        if line is not None:
            message = f"line {line}: {message}"
        super().__init__(message)


class ConfigValidationError(TissueGrowthError):
    """A configuration value violates a documented invariant."""

    def __init__(self, invariant: str, message: str):
        super().__init__(f"{invariant}: {message}")
        self.invariant = invariant


class SnapshotError(TissueGrowthError):
    """A snapshot file could not be read."""


class FormatVersionMismatch(SnapshotError):
    """The snapshot was written by an incompatible format version."""


class ChecksumMismatch(SnapshotError):
    """The snapshot payload does not match its checksum (corrupt or truncated)."""


class DimensionMismatch(SnapshotError):
    """The snapshot dimension differs from the configured grid."""


class GammaMismatch(SnapshotError):
    """The snapshot was written with a different pressure exponent than the configured model."""


class ModelError(TissueGrowthError, ValueError):
    """Invalid reaction model parameters or model-dependent input."""
