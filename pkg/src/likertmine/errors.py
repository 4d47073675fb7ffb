"""Exception hierarchy shared by the library and the CLI exit codes."""


class LikertMineError(Exception):
    """Base class for all library errors."""

    exit_code = 1


class ConfigError(LikertMineError, ValueError):
    exit_code = 2


class DataError(LikertMineError, ValueError):
    exit_code = 3


class ParseError(DataError):
    """A CSV row could not be read (wrong column count, non-integer cell)."""

    def __init__(self, message, row=None, column=None):
        super().__init__(message)
        self.row = row
        self.column = column


class ValidationError(DataError):
    """A cell parsed but lies outside its admissible code range."""

    def __init__(self, message, field=None, value=None):
        super().__init__(message)
        self.field = field
        self.value = value


class NumericalError(LikertMineError, ArithmeticError):
    exit_code = 4


class UndefinedStatisticError(NumericalError):
    """Raised when a statistic's denominator vanishes."""
