"""Exception types shared across the package."""


class PeriflowError(Exception):
    """Base class for all library errors."""


class DegenerateSurfaceError(PeriflowError):
    """Chart fails the immersion condition (|X_theta| below threshold)."""


class GridMismatchError(PeriflowError):
    """Field and grid sizes disagree."""


class DegenerateMetricError(PeriflowError):
    """Assembled metric is numerically singular."""


class StepError(PeriflowError):
    """Implicit time step failed; carries the offending time level."""

    def __init__(self, message: str, level: int):
        super().__init__(f"{message} (time level {level})")
        self.level = level


class ContractionBoundError(PeriflowError):
    """Measured contraction ratio violates the asserted bound."""

    def __init__(self, message: str, probe_index: int, ratio: float, bound: float):
        super().__init__(message)
        self.probe_index = probe_index
        self.ratio = ratio
        self.bound = bound


class NonuniquenessError(PeriflowError):
    """Mean-adjusted monodromy system is numerically singular."""

    def __init__(self, message: str, smallest_singular_value: float):
        super().__init__(message)
        self.smallest_singular_value = smallest_singular_value


class ProjectionError(PeriflowError):
    """Closest-point Newton iteration failed at some grid node."""

    def __init__(self, message: str, location=None):
        super().__init__(message)
        self.location = location


class BandError(PeriflowError):
    """Narrow-band construction or stencil constraint violated."""


class ExtractionError(PeriflowError):
    """Band-average extraction sampled outside the valid band."""


class ConfigError(PeriflowError):
    """Configuration file is malformed or violates a precondition."""
