"""Exception hierarchy shared by all modules."""

from __future__ import annotations


class LogBranchError(Exception):
    """Base class for every error raised by the package."""


class DomainError(LogBranchError, ValueError):
    """An argument lies outside the domain of the operation."""


class NumericOverflowError(LogBranchError, ArithmeticError):
    """A computation produced a non-finite value."""


class ClassificationFailedError(LogBranchError):
    """A branching mechanism could not be classified."""


class UndecidableError(LogBranchError):
    """A convergence decision fell inside the indeterminate band.

    Attributes
    ----------
    exponent : float or None
        The estimated asymptotic exponent that triggered the failure.
    evidence : dict
        Numeric evidence gathered before giving up.
    """

    def __init__(self, message: str, exponent: float | None = None, evidence: dict | None = None):
        super().__init__(message)
        self.exponent = exponent
        self.evidence = dict(evidence or {})


class NonIntegrableError(LogBranchError, ArithmeticError):
    """An integrand is not integrable at a boundary (e.g. m without log-moment)."""


class TruncationError(LogBranchError, ArithmeticError):
    """An improper integral did not settle under growing truncation.

    Attributes
    ----------
    partial_sums : list of (float, float)
        ``(truncation point, partial integral)`` pairs.
    """

    def __init__(self, message: str, partial_sums=None):
        super().__init__(message)
        self.partial_sums = list(partial_sums or [])


class SolverFailureError(LogBranchError, ArithmeticError):
    """The Riccati backward sweep left its admissible region."""


class UnreliableEstimateError(LogBranchError):
    """A Monte Carlo estimate is dominated by censored paths."""


class ValidityWarning(UserWarning):
    """A value was computed outside the conditions under which it is proven."""
