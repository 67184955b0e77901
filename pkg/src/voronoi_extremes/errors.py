"""Exception hierarchy.

Each class carries the CLI exit code it maps to, so the command-line layer
never needs to special-case individual errors.
"""

from __future__ import annotations


class VoronoiExtremesError(Exception):
    exit_code = 1


class ConfigError(VoronoiExtremesError, ValueError):
    """Invalid configuration or usage (bad flag value, mismatched grids)."""

    exit_code = 2


class DomainError(VoronoiExtremesError, ValueError):
    """Argument outside the mathematical domain of a function."""

    exit_code = 2


class DataError(VoronoiExtremesError, ValueError):
    """Malformed or unusable input data."""

    exit_code = 3


class EmptyDataError(DataError):
    pass


class SampleSizeError(DataError):
    pass


class DegenerateDataError(DataError):
    pass


class ConvergenceError(VoronoiExtremesError, RuntimeError):
    """Optimizer did not converge. ``trace`` holds (iteration, objective, grad norm)."""

    exit_code = 4

    def __init__(self, message: str, trace=None):
        super().__init__(message)
        self.trace = list(trace or [])


class GeometryError(VoronoiExtremesError, RuntimeError):
    exit_code = 5

    def __init__(self, message: str, window_index: int | None = None):
        if window_index is not None:
            message = f"window {window_index}: {message}"
        super().__init__(message)
        self.window_index = window_index


class DegenerateInputError(GeometryError):
    """Fewer than three points, all points collinear, or duplicate points."""


class DegenerateTriangleError(GeometryError):
    pass


class ContractError(VoronoiExtremesError, RuntimeError):
    """An operation was called on an object that violates its precondition."""
