"""Exception types shared across the package."""


class UrbanPulseError(Exception):
    """Base class for all package-specific errors."""


class EmptyTextError(UrbanPulseError):
    """Raised when a text to tokenize is empty or whitespace-only."""


class ConfigError(UrbanPulseError):
    """Raised for invalid configuration values or missing referenced files."""


class ShapeError(UrbanPulseError):
    """Raised when an array or sequence has the wrong length or dimensions."""


class ModelError(UrbanPulseError):
    """Raised when a model is missing, untrained, or internally inconsistent."""


class FormatError(UrbanPulseError):
    """Raised for malformed input documents (JSON payloads, model files)."""


class DivergenceError(UrbanPulseError):
    """Raised when training produces a non-finite loss.

    Carries the epoch index at which the divergence was detected.
    """

    def __init__(self, message: str, epoch: int):
        super().__init__(f"{message} (epoch {epoch})")
        self.epoch = epoch


class EmptyGraphError(UrbanPulseError):
    """Raised when an event graph is built from zero authority records."""


class LocationUnresolvedError(UrbanPulseError):
    """Raised when a computation needs a location the annotation lacks."""
