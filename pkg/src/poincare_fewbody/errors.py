"""Exception types shared across the package."""

from __future__ import annotations


class ParameterError(ValueError):
    """An argument is outside the range an operation accepts."""


class DomainError(ValueError):
    """Momentum or group data is not in the domain of the operation (e.g. off-shell)."""


class ContractViolation(ValueError):
    """An operator does not satisfy the structural contract an operation requires."""


class NumericalError(RuntimeError):
    """An iterative or linear-algebra step failed.

    ``iterations`` carries the iteration count for iterative methods and
    ``condition`` the condition-number estimate for linear solves, when known.
    """

    def __init__(self, message: str, iterations: int | None = None, condition: float | None = None):
        super().__init__(message)
        self.iterations = iterations
        self.condition = condition


class UnphysicalPotentialError(NumericalError):
    """The Coester embedding maps an eigenvalue to an imaginary mass."""
