"""Exception types shared across the harness."""


class PosemtError(Exception):
    """Base class for all harness errors."""


class AbsentKeypointError(PosemtError):
    """A coordinate operation was asked to use a keypoint marked absent."""


class InvalidDimensionsError(PosemtError):
    """Image or canvas dimensions are zero or negative."""


class DegenerateNormalizationError(PosemtError):
    """Reference landmarks are missing or coincident; the record is unevaluable."""


class InvalidSwapMapError(PosemtError):
    """A swap pair references a landmark id unknown to the group."""


class InvalidParameterError(PosemtError):
    """A transformation parameter is outside its valid range."""


class MaskMismatchError(PosemtError):
    """Mask dimensions do not match the paired image."""


class UnsupportedMaskedTransformError(PosemtError):
    """Only pixelwise transforms may be restricted to a mask zone."""


class ConfigError(PosemtError):
    """Malformed rule set, campaign or topology configuration."""


class AdapterFailure(PosemtError):
    """The SUT adapter crashed, timed out or returned a malformed response.

    Carries the raw payload (if any) so the record can be diagnosed rather
    than silently dropped.
    """

    def __init__(self, message: str, payload: str | None = None):
        super().__init__(message)
        self.payload = payload


class EmptyAnalysisError(PosemtError):
    """An analysis was requested over an empty violation table."""
