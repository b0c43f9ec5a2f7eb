"""Exception hierarchy shared by all pontrylie modules."""

from __future__ import annotations


class PontrylieError(Exception):
    """Base class for every error raised by this package."""


class DimensionMismatchError(PontrylieError, ValueError):
    """An argument has the wrong length or shape for the owning object."""


class InvalidAlgebraError(PontrylieError, ValueError):
    """Structure constants violate antisymmetry, Jacobi, or the matrix realization."""


class NonNilpotentError(PontrylieError):
    """Exponential series did not terminate within the allowed number of terms."""


class EvaluationError(PontrylieError):
    """A dynamics/Lagrangian/Hamiltonian evaluation produced a non-finite value.

    Carries the probe point so the failure can be reproduced.
    """

    def __init__(self, message: str, point=None):
        super().__init__(message)
        self.point = point


class ConvergenceError(PontrylieError):
    """Newton iteration exhausted its budget; carries the last residual norm."""

    def __init__(self, message: str, residual: float = float("nan")):
        super().__init__(message)
        self.residual = residual


class RegularityError(PontrylieError):
    """The control Hessian is (numerically) singular where it must be invertible."""


class ReductionUnsupportedError(PontrylieError):
    """The problem lacks the trivialization data needed to reduce it."""


class TrajectoryFormatError(PontrylieError, ValueError):
    """A trajectory file or in-memory trajectory violates the expected layout."""
