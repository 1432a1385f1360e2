"""Exception types shared across the package."""


class MedfrontError(Exception):
    """Base class for all package errors."""


class SizingError(MedfrontError, ValueError):
    """An array or transform size is invalid (non power-of-two, too short, ...)."""


class DesignError(MedfrontError, ValueError):
    """Filter design parameters are out of range."""


class ShapeError(MedfrontError, ValueError):
    """Operands of an operation have incompatible shapes."""


class NumericalError(MedfrontError, FloatingPointError):
    """A computation produced NaN or Inf."""

    def __init__(self, message, batch_ids=None):
        super().__init__(message)
        self.batch_ids = list(batch_ids) if batch_ids is not None else None


class WavParseError(MedfrontError, ValueError):
    """A RIFF/WAVE container could not be parsed."""


class AnnotationError(MedfrontError, ValueError):
    """A respiratory-cycle annotation file is malformed."""


class DataError(MedfrontError):
    """Input data is missing, inconsistent or unusable."""


class ConfigError(MedfrontError, ValueError):
    """A run configuration is invalid."""
