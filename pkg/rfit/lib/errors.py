"""Exception hierarchy shared by the library and the command modules."""

__all__ = [
    "RfitError",
    "ConfigError",
    "SchemaError",
    "ParseError",
    "DomainError",
    "MissingValueError",
    "DegenerateColumnError",
    "UnseenLevelError",
    "GrowthError",
    "ResampleError",
    "PredictionError",
]


class RfitError(Exception):
    """Base class for every error raised on purpose by rfit."""


class ConfigError(RfitError, ValueError):
    pass


class SchemaError(RfitError):
    pass


class ParseError(RfitError, ValueError):
    def __init__(self, message: str, row=None, column=None):
        super().__init__(message)
        self.row = row
        self.column = column


class DomainError(RfitError, ValueError):
    pass


class MissingValueError(RfitError):
    """Missing cells found while on_missing="error"; ``rows`` lists them (1-based CSV lines)."""

    def __init__(self, message: str, rows=()):
        super().__init__(message)
        self.rows = tuple(rows)


class DegenerateColumnError(RfitError):
    """A column carries no splitting information (zero variance or one level)."""


class UnseenLevelError(RfitError, KeyError):
    def __str__(self) -> str:
        return str(self.args[0]) if self.args else ""


class GrowthError(RfitError):
    pass


class ResampleError(RfitError):
    pass


class PredictionError(RfitError, ValueError):
    pass
