"""Exception types raised by cqa-rank.

The command line front end maps them to process exit codes:

  ConfigError                              -> 2
  SchemaError, IntegrityError, FormatError -> 3
  NumericalError, DegenerateDataError      -> 4
"""

__all__ = [
    "CqaRankError",
    "ConfigError",
    "SchemaError",
    "IntegrityError",
    "FormatError",
    "NumericalError",
    "DegenerateDataError",
]


class CqaRankError(Exception):
    """Base class of all cqa-rank errors."""


class ConfigError(CqaRankError, ValueError):
    """Invalid configuration value or combination of options."""


class SchemaError(CqaRankError, ValueError):
    """Input record does not conform to the dataset schema."""

    def __init__(self, message: str, lineno: int = 0) -> None:
        if lineno:
            message = f"line {lineno}: {message}"
        super().__init__(message)
        self.lineno = lineno


class IntegrityError(CqaRankError):
    """Loaded data violates an invariant (duplicate ids, rank gaps, ...)."""


class FormatError(CqaRankError, ValueError):
    """Malformed model, embedding or prediction file."""


class NumericalError(CqaRankError, ArithmeticError):
    """Non-finite values or failed optimization."""


class DegenerateDataError(NumericalError):
    """Training data does not allow fitting a model, eg. a single class."""
