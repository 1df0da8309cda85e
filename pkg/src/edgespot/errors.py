"""Exception hierarchy shared across the package.

Everything raised on bad data or bad configuration derives from
:class:`EdgeSpotError` so the CLI can map it to a single exit code.
"""


class EdgeSpotError(Exception):
    """Base class for all data/validation errors raised by this package."""


class ShapeError(EdgeSpotError):
    """A tensor extent does not match what an operation requires.

    Carries the offending axis name so callers can report exactly which
    dimension disagreed.
    """

    def __init__(self, axis: str, expected, got, context: str = ""):
        self.axis = axis
        self.expected = expected
        self.got = got
        where = f" in {context}" if context else ""
        super().__init__(
            f"shape mismatch on axis '{axis}'{where}: expected {expected}, got {got}"
        )


class ParameterError(EdgeSpotError):
    """A scalar or structural parameter is outside its allowed domain."""


class AudioFormatError(EdgeSpotError):
    """Audio input that the WAV reader or frontend cannot accept."""


class BundleError(EdgeSpotError):
    """Weight-bundle or tensor-container serialization failure."""


class StoreError(EdgeSpotError):
    """Prototype-store validation or persistence failure."""


class DatasetError(EdgeSpotError):
    """Dataset layout or trial-generation preconditions violated."""
