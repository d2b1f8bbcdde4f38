"""Exception hierarchy shared across the package."""


class TrackcastError(Exception):
    """Base class for all package-specific failures."""


class DimensionError(TrackcastError):
    """Operand shapes are incompatible."""


class ConfigurationError(TrackcastError):
    """A configuration value is invalid or unknown."""


class UsageError(TrackcastError):
    """An operation was called in an unsupported way."""


class EncodingError(TrackcastError):
    """A value cannot be one-hot encoded."""


class ValidationError(TrackcastError):
    """Input data violates a documented invariant."""


class DatasetFormatError(TrackcastError):
    """A dataset file does not match the on-disk schema."""


class CheckpointError(TrackcastError):
    """A checkpoint stream is corrupt or from an unsupported version."""


class NumericError(TrackcastError):
    """A numeric quantity became non-finite."""


class TrainingDivergedError(NumericError):
    """Training loss became non-finite at a specific epoch."""

    def __init__(self, epoch: int, message: str = ""):
        self.epoch = epoch
        super().__init__(message or f"training diverged at epoch {epoch}")


class DegenerateDataError(TrackcastError):
    """A metric or fit is undefined for the given data."""
