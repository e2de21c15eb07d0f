"""Exception hierarchy shared by the library and the command-line front end."""


class GurevicError(Exception):
    """Base class for all errors raised by :mod:`gurevic`."""

    exit_code = 1


class ConfigError(GurevicError):
    """Malformed or invalid configuration document."""

    exit_code = 2

    def __init__(self, message, line=None, column=None):
        self.line = line
        self.column = column
        if line is not None:
            where = f"line {line}" + (f", column {column}" if column is not None else "")
            message = f"{where}: {message}"
        super().__init__(message)


class ValidationError(ConfigError):
    """A structurally parsed object that violates a model invariant."""


class BudgetError(GurevicError):
    """A computation would exceed its configured memory or size budget."""

    exit_code = 3


class ConvergenceError(GurevicError):
    """An iterative numerical method failed to reach its tolerance."""

    exit_code = 4

    def __init__(self, message, achieved=None):
        self.achieved = achieved
        super().__init__(message)


class EmptySetError(GurevicError):
    """A constrained orbit set has no points at the requested length."""

    exit_code = 2
