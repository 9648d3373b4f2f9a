"""Exception hierarchy.

Every error raised by the package derives from :class:`WaamError`, so callers
(the CLI in particular) can map failure families to exit codes.
"""


class WaamError(Exception):
    """Base class for all package errors."""


class DomainError(WaamError, ValueError):
    """An argument lies outside the mathematical domain of an operation."""


class ShapeError(WaamError, ValueError):
    """Vector lengths disagree or a vector is empty."""


class RankDeficiencyError(WaamError, ValueError):
    """Calibration data cannot determine both model coefficients."""


class NonInvertibleError(WaamError, ValueError):
    """The deposition model has a zero exponent and has no inverse."""


class ConfigError(WaamError, ValueError):
    """Invalid configuration value or malformed input file."""


class GeometryInfeasibleError(WaamError):
    """No layer angle increment fits the part inside the process envelope."""


class PlanInfeasibleError(WaamError):
    """A planned deposition requires a torch speed outside the bounds."""


class SolverError(WaamError):
    """The velocity solver failed; ``partial_trace`` holds completed layers."""

    def __init__(self, message, partial_trace=None):
        super().__init__(message)
        self.partial_trace = partial_trace


class ComparisonError(WaamError, ValueError):
    """Traces cannot be compared layer by layer."""
