"""Exception types shared across the toolkit.

Plain file-not-found and unwritable-path conditions reuse the builtin
``FileNotFoundError`` / ``OSError``.
"""


class FacecraftError(Exception):
    """Base class for all toolkit-specific errors."""


class DecodeError(FacecraftError):
    """Image file exists but cannot be decoded as PNG or JPEG."""


class TooSmallError(FacecraftError):
    """Source image is smaller than 8x8 in at least one dimension."""


class ShapeMismatchError(FacecraftError):
    """Tensor or latent shape does not match what the weights expect."""


class VersionMismatchError(FacecraftError):
    """Checkpoint/latent file has unknown magic bytes or format version."""


class ChecksumError(FacecraftError):
    """Checkpoint/latent file is truncated or fails its checksum."""


class EmptyCorpusError(FacecraftError):
    """Training corpus directory contains no usable face textures."""


class NonFiniteLossError(FacecraftError):
    """An optimization objective became NaN or infinite."""

    def __init__(self, message: str, step: int | None = None):
        super().__init__(message)
        self.step = step


class ScorerFailureError(FacecraftError):
    """A text-image scorer raised or returned an unusable value."""
