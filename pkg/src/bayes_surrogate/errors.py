"""Exception hierarchy shared by every module."""


class SurrogateError(Exception):
    """Base class for all errors raised by this package."""


class ConfigError(SurrogateError, ValueError):
    """Invalid or inconsistent configuration (priors, grid, CLI flags)."""


class DataError(SurrogateError, ValueError):
    """Problem with input observations.

    ``row`` is the 1-based line (CSV) or element (JSON) number when known.
    """

    def __init__(self, message, row=None):
        if row is not None:
            message = f"row {row}: {message}"
        super().__init__(message)
        self.row = row


class ParseError(DataError):
    pass


class ValidationError(DataError):
    pass


class SingularDesignError(SurrogateError, ArithmeticError):
    """Normal matrix is rank deficient or too ill conditioned to factor."""

    def __init__(self, message, columns=()):
        super().__init__(message)
        self.columns = tuple(columns)


class GridError(SurrogateError, ValueError):
    """Frequency grid is invalid or exceeds the configured ceiling."""


class CadenceError(SurrogateError, ValueError):
    """Observing cadence cannot be generated as requested."""

    def __init__(self, message, shortfall=0):
        super().__init__(message)
        self.shortfall = shortfall
