"""Exception hierarchy shared by all blobflow modules."""

from __future__ import annotations


class BlobflowError(Exception):
    """Base class for every error raised by this package."""


class InvalidParameterError(BlobflowError, ValueError):
    """A parameter lies outside the admissible range of an operation."""


class EvaluationError(BlobflowError, ArithmeticError):
    """A quadrature or energy evaluation produced a non-finite value.

    ``location`` carries the offending node (or ``None`` when unknown).
    """

    def __init__(self, message: str, location=None):
        super().__init__(message)
        self.location = location


class CoverageError(BlobflowError, ValueError):
    """An evaluation grid does not cover the effective support."""


class BlowUpError(BlobflowError, RuntimeError):
    """Particle positions became non-finite during time stepping."""

    def __init__(self, message: str, particle: int, time: float):
        super().__init__(message)
        self.particle = particle
        self.time = time


class ConvergenceError(BlobflowError, RuntimeError):
    """An inner solver failed to converge.

    The last iterate and the remaining objective gap are attached so callers
    can inspect or resume.
    """

    def __init__(self, message: str, last_iterate=None, gap: float = float("nan")):
        super().__init__(message)
        self.last_iterate = last_iterate
        self.gap = gap


class ConfigError(BlobflowError, ValueError):
    """A run configuration failed schema validation."""
