"""Exception types shared across the package."""

from __future__ import annotations


class TrunklineError(Exception):
    """Base class for all trunkline errors."""


class DomainError(TrunklineError, ValueError):
    """An argument lies outside the mathematical domain of an operation."""


class UnderdeterminedError(DomainError):
    """Too few data points for the requested fit degree."""


class DegenerateInputError(DomainError):
    """Input that collapses a fit system (duplicate parameters, rank loss)."""


class OptimizationDivergenceError(TrunklineError):
    """Optimization produced a non-finite or exploding loss.

    Carries the partial trace in ``trace`` for post-mortem inspection.
    """

    def __init__(self, message: str, trace=None):
        super().__init__(message)
        self.trace = trace


class MeasurementRejectedError(TrunklineError):
    """Depth coverage along the curve is too poor to measure reliably."""

    def __init__(self, message: str, valid_fraction: float | None = None):
        super().__init__(message)
        self.valid_fraction = valid_fraction


class FileFormatError(TrunklineError):
    """Problem with an input file; carries the path and line number."""

    def __init__(self, message: str, path=None, line: int | None = None):
        loc = str(path) if path is not None else "<input>"
        if line is not None:
            loc = f"{loc}:{line}"
        super().__init__(f"{loc}: {message}")
        self.path = path
        self.line = line


class ParseError(FileFormatError):
    """Input that is not syntactically well formed."""


class ValidationError(FileFormatError):
    """Well-formed input that violates a schema invariant."""
