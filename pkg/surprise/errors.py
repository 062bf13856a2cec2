"""Exception hierarchy shared by every surprise-sampler module."""

from __future__ import annotations

from typing import TYPE_CHECKING

if TYPE_CHECKING:
    from .models import SolverReport


class SurpriseError(Exception):
    """Base class for all library errors."""


class DataError(SurpriseError, ValueError):
    pass


class ParseError(DataError):
    """A CSV cell or row could not be turned into a finite number."""

    def __init__(self, message: str, *, row: int | None = None, column: str | None = None) -> None:
        super().__init__(message)
        self.row = row
        self.column = column


class EmptyDatasetError(DataError):
    pass


class ConstantColumnError(DataError):
    pass


class ContractError(SurpriseError, ValueError):
    """A documented precondition of an operation does not hold."""


class ConfigError(SurpriseError, ValueError):
    """Bad command-line usage or configuration file content."""


class DegenerateDesignError(SurpriseError, ValueError):
    pass


class NumericalError(SurpriseError, ArithmeticError):
    pass


class NotPSDError(NumericalError):
    pass


class DecompositionError(NumericalError):
    """Cholesky factorisation met a non-positive pivot."""

    def __init__(self, message: str, *, pivot: int) -> None:
        super().__init__(message)
        self.pivot = pivot


class StallError(NumericalError):
    pass


class SeparationError(NumericalError):
    pass


class _ReportError(SurpriseError, RuntimeError):
    def __init__(self, message: str, report: SolverReport | None = None) -> None:
        super().__init__(message)
        self.report = report


class PilotError(_ReportError):
    pass


class FitError(_ReportError):
    pass


class InferenceError(SurpriseError, RuntimeError):
    pass


class SimulationError(SurpriseError, RuntimeError):
    pass
