"""Shared exception types for solver and configuration failures."""


class HessvarError(Exception):
    """Base class for all errors raised by this package."""


class ConfigError(HessvarError, ValueError):
    """Invalid parameters, grid settings, or run configuration."""


class AdmissibilityError(HessvarError, ValueError):
    """A profile violates the cone or boundary conditions an operation requires."""


class NumericalError(HessvarError, RuntimeError):
    """A solver could not produce a usable result."""


class StuckFlowError(NumericalError):
    """Time-step underflow: the descent flow cannot make an accepted step."""


class BracketError(NumericalError):
    """Shooting bracket contains no usable sign change."""


class TruncationError(NumericalError):
    """Whole-space tail bound not achievable within the radius budget."""


class ResolutionError(NumericalError):
    """Grid too coarse for the feature it must resolve."""


class ConvergenceError(NumericalError):
    """Iteration budget exhausted before reaching tolerance."""
