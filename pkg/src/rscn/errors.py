"""Exception types shared across the package."""


class RscnError(Exception):
    """Base class for all library errors."""


class ContractViolationError(RscnError, ValueError):
    """An argument violates an operation's documented contract."""


class NumericOverflowError(RscnError, ArithmeticError):
    """A computation produced a non-finite value."""


class EstimationFailureError(RscnError, RuntimeError):
    """An iterative estimator did not converge within its iteration cap.

    ``best_bound`` holds the tightest bound achieved before giving up.
    """

    def __init__(self, message: str, best_bound: float):
        super().__init__(f"{message} (best bound achieved: {best_bound:.6g})")
        self.best_bound = best_bound


class MetricUndefinedError(RscnError, ValueError):
    """A metric is undefined for the given data (e.g. zero target variance)."""


class SchemaError(RscnError, ValueError):
    """A data file does not match the expected column schema."""


class CsvParseError(RscnError, ValueError):
    """A CSV cell failed to parse; ``line`` is the 1-based file line."""

    def __init__(self, message: str, line: int):
        super().__init__(f"line {line}: {message}")
        self.line = line
