"""Exception types shared across the package."""


class BispError(Exception):
    """Base class for package errors."""


class ConfigurationError(BispError):
    """Invalid configuration: bad paths, unknown variants, inconsistent weights."""


class DataError(BispError):
    """Malformed or unusable input data (labels, layouts, dumps)."""


class TrainingDivergedError(BispError):
    """Training hit a non-finite loss; diagnostics were dumped to disk."""
