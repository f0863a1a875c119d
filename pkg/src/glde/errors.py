"""Exception hierarchy."""


class GLDEError(Exception):
    """Base class for all package errors."""


class DimensionError(GLDEError, ValueError):
    """Operands disagree in dimension or period."""


class ConditionHError(GLDEError):
    """A jump factor ``I - pre`` or ``I + post`` is numerically singular."""

    def __init__(self, message, report=None):
        super().__init__(message)
        self.report = report


class ResonanceError(GLDEError):
    """No exponential dichotomy: ``I - M`` may be singular.

    ``multipliers`` lists the Floquet multipliers on or near the unit circle.
    """

    def __init__(self, message, multipliers=()):
        super().__init__(message)
        self.multipliers = tuple(multipliers)


class ConsistencyError(GLDEError):
    """Two independent computations of the same quantity disagree."""
