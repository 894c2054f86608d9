"""Exception hierarchy for qbayes.

Three families map onto distinct CLI exit codes (see :data:`EXIT_CODES`):

* usage errors: bad arguments, bad gates, mismatched dimensions, resource limits
* data errors: unreadable files, bad generator geometry, failed rescaling, encoding
* numerical errors: degenerate ansatz/likelihood/posterior quantities

Argument-style errors also subclass :class:`ValueError` so callers catching
``ValueError`` keep working.
"""

__all__ = [
    "QBayesError",
    "UsageError",
    "InvalidArgumentError",
    "InvalidGateError",
    "InvalidParameterError",
    "DimensionError",
    "ResourceLimitError",
    "ConfigError",
    "DataError",
    "ParseError",
    "GeneratorError",
    "RescaleError",
    "EncodingError",
    "NumericalError",
    "DegenerateAnsatzError",
    "DegenerateLikelihoodError",
    "DegeneratePosteriorError",
    "SweepError",
    "EXIT_CODES",
    "exit_code_for",
]

from typing import Any


class QBayesError(Exception):
    """Base class for all library errors."""


class UsageError(QBayesError):
    pass


class InvalidArgumentError(UsageError, ValueError):
    pass


class InvalidGateError(UsageError, ValueError):
    pass


class InvalidParameterError(UsageError, ValueError):
    pass


class DimensionError(UsageError, ValueError):
    pass


class ResourceLimitError(UsageError):
    pass


class ConfigError(UsageError, ValueError):
    pass


class DataError(QBayesError):
    pass


class ParseError(DataError):
    def __init__(self, message: str, line: int | None = None) -> None:
        self.line = line
        if line is not None:
            message = f"line {line}: {message}"
        super().__init__(message)


class GeneratorError(DataError):
    pass


class RescaleError(DataError):
    pass


class EncodingError(DataError, ValueError):
    pass


class NumericalError(QBayesError):
    pass


class DegenerateAnsatzError(NumericalError):
    pass


class DegenerateLikelihoodError(NumericalError):
    pass


class DegeneratePosteriorError(NumericalError):
    pass


class SweepError(QBayesError):
    """Raised when a sweep repetition fails; ``partial`` holds the rows finished so far."""

    def __init__(self, message: str, partial: Any, cause: QBayesError) -> None:
        super().__init__(message)
        self.partial = partial
        self.cause = cause


EXIT_CODES: dict[type[QBayesError], int] = {
    UsageError: 2,
    DataError: 3,
    NumericalError: 4,
}


def exit_code_for(error: QBayesError) -> int:
    if isinstance(error, SweepError):
        return exit_code_for(error.cause)
    for cls, code in EXIT_CODES.items():
        if isinstance(error, cls):
            return code
    return 1
