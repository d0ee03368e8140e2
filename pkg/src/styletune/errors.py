"""Exception hierarchy shared across the package."""


class StyletuneError(Exception):
    """Base class for all package errors."""

    exit_code = 4


class InvalidArgument(StyletuneError, ValueError):
    exit_code = 2


class ConfigError(StyletuneError):
    exit_code = 2


class IncompatibleCheckpoint(StyletuneError):
    exit_code = 3


class CorruptCheckpoint(StyletuneError):
    exit_code = 3


class UnsupportedVersion(CorruptCheckpoint):
    pass


class IncompatibleConfig(IncompatibleCheckpoint):
    pass


class DataError(StyletuneError):
    exit_code = 2


class TrainingError(StyletuneError):
    exit_code = 4
