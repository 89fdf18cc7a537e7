"""
Errors Module
=================

Exception hierarchy shared by every module in the package.

- DataError: unusable input data (parse errors, length problems, non-finite values)
- NumericalError: optimizer, estimation and stationarity failures

Each class carries the exit code the command-line front end reports for it.
"""

from typing import Any, Optional


class SwrError(Exception):
    """Base class for all package errors."""

    exit_code = 3


class DataError(SwrError, ValueError):
    """Raised when input series or files cannot be used."""

    exit_code = 2


class InsufficientDataError(DataError):
    """Raised when a series is shorter than the kernel support requires."""


class NumericalError(SwrError, ArithmeticError):
    """Raised when a numerical procedure fails."""

    exit_code = 3


class OptimizerError(NumericalError):
    """Raised when the minimizer cannot start or evaluate its objective."""


class StationarityError(NumericalError):
    """Raised when an autoregressive fit has a root on or inside the unit circle."""


class TrainingError(NumericalError):
    """
    Raised when every candidate of a training iteration failed.

    Attributes:
        partial_report: FitReport assembled from the iterations completed so far
    """

    def __init__(self, message: str, partial_report: Optional[Any] = None):
        super().__init__(message)
        self.partial_report = partial_report
