"""Exception hierarchy shared by every module."""


class QPortfolioError(Exception):
    """Base class for all errors raised by this package."""


class DomainError(QPortfolioError, ValueError):
    """An argument lies outside the mathematical domain of an operation."""


class UnsupportedError(QPortfolioError, ValueError):
    """The requested parameter regime is valid but not implemented."""


class DataError(QPortfolioError, ValueError):
    """Input data is malformed, inconsistent or degenerate."""


class UndefinedMetricError(QPortfolioError, ArithmeticError):
    """A risk metric has a zero denominator and is undefined."""


class OptimizationFailedError(QPortfolioError, RuntimeError):
    """Differential evolution never saw a finite objective value."""

    def __init__(self, message, trace=None):
        super().__init__(message)
        self.trace = list(trace) if trace is not None else []
