"""Exception hierarchy shared by every module.

The CLI maps these onto process exit codes, so new errors should subclass
one of the three families below rather than ``Exception`` directly.
"""


class WealthVarError(Exception):
    """Base class for all package errors."""


class ConfigError(WealthVarError, ValueError):
    """Bad configuration, arguments or specification (exit code 2)."""


class DataError(WealthVarError):
    """Missing, unreadable or inconsistent input data (exit code 3)."""


class NumericalError(WealthVarError, ArithmeticError):
    """A numerical procedure broke down (exit code 4)."""


class SchemaError(ConfigError):
    pass


class RecordValidationError(DataError):
    def __init__(self, reason: str, detail: str = ""):
        self.reason = reason
        super().__init__(f"{reason}: {detail}" if detail else reason)


class UndefinedIndexError(NumericalError):
    """An inequality index has a zero denominator."""

    def __init__(self, message: str, **context: float):
        self.context = context
        if context:
            extra = ", ".join(f"{k}={v:.6g}" for k, v in context.items())
            message = f"{message} ({extra})"
        super().__init__(message)


class InsufficientDataError(DataError):
    pass


class IdentificationError(NumericalError):
    def __init__(self, message: str, tries: int = 0):
        self.tries = tries
        super().__init__(message)


class DependencyError(DataError):
    """A pipeline stage was run before the stage producing its inputs."""
