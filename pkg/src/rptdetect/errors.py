"""Exception types raised across the package."""


class RPTError(Exception):
    """Base class for all package errors."""


class InvalidArgumentError(RPTError, ValueError):
    """An argument is outside the domain of the operation."""


class SingularSupportError(RPTError, ValueError):
    """A restricted dictionary does not have full column rank."""


class EstimationError(RPTError, ValueError):
    """Not enough (or degenerate) data to estimate a quantity."""


class NumericError(RPTError, ArithmeticError):
    """A numerical routine failed to converge or produced a degenerate value."""


class ParseError(RPTError, ValueError):
    """A data file could not be parsed."""

    def __init__(self, path, line, column, message):
        self.path = path
        self.line = line
        self.column = column
        super().__init__(f"{path}:{line}:{column}: {message}")
