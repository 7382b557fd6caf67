"""Exception types raised by the swd package."""


class SWDError(Exception):
    """Base class for all swd errors."""


class InvalidDesignError(SWDError, ValueError):
    pass


class DegenerateVarianceError(SWDError, ArithmeticError):
    """Raised when 1 - W*T is not positive, so the variance formulas break down."""


class NonEstimableError(SWDError):
    """The treatment effect cannot be estimated from the allocation."""


class TooLargeError(SWDError):
    pass


class NoQualifierError(SWDError):
    def __init__(self, message: str, best_efficiency: float | None = None):
        super().__init__(message)
        self.best_efficiency = best_efficiency


class ConfigError(SWDError, ValueError):
    """Bad run configuration; carries the offending key and line when known."""

    def __init__(self, message: str, key: str | None = None, line: int | None = None):
        where = []
        if key is not None:
            where.append(f"key '{key}'")
        if line is not None:
            where.append(f"line {line}")
        prefix = f"{', '.join(where)}: " if where else ""
        super().__init__(prefix + message)
        self.key = key
        self.line = line
