"""Exception hierarchy shared by the library and the CLI."""

from __future__ import annotations


class HdsiError(Exception):
    """Base class for all errors raised by hdsi."""

    stage = "hdsi"


class DataError(HdsiError, ValueError):
    """Malformed or unusable input data."""

    stage = "data"


class EstimationError(HdsiError, ArithmeticError):
    """A regression or bootstrap step cannot be carried out."""

    stage = "estimation"


class ConvergenceError(EstimationError):
    """Coordinate descent hit its pass limit.

    Carries the last iterate (standardized coefficients) and the largest
    KKT violation at that iterate so callers can decide whether to accept it.
    """

    def __init__(self, message: str, coefficients, kkt_violation: float):
        super().__init__(message)
        self.coefficients = coefficients
        self.kkt_violation = kkt_violation
