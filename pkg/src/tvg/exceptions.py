"""Exception hierarchy.

The CLI maps these onto exit codes: ``ParameterError``/``ShapeError`` are
data errors (2) when they come from file contents, ``TensorFormatError`` is
always 2 and ``NumericalError`` is 3.
"""


class TVGError(Exception):
    """Base class for every error raised by this package."""


class ParameterError(TVGError, ValueError):
    """A scalar argument is outside its documented range."""


class ShapeError(TVGError, ValueError):
    """Array shapes are inconsistent or violate a rank/size requirement."""


class NumericalError(TVGError, ArithmeticError):
    """A computation could not be carried out to the required accuracy."""


class CholeskyError(NumericalError):
    """Cholesky factorization failed even at the largest allowed jitter."""

    def __init__(self, message, *, jitter, condition):
        super().__init__(f"{message} (jitter={jitter:.3g}, condition estimate={condition:.3g})")
        self.jitter = jitter
        self.condition = condition


class DegenerateInterpolationError(NumericalError):
    """Spherical interpolation is undefined for the given pair of inputs."""


class TensorFormatError(TVGError):
    """A TVGL file does not conform to the on-disk format."""


class BadMagicError(TensorFormatError):
    pass


class UnsupportedVersionError(TensorFormatError):
    pass


class TruncatedPayloadError(TensorFormatError):
    pass


class DimensionOverflowError(TensorFormatError):
    pass


class TrailingBytesError(TensorFormatError):
    pass


class StageError(TVGError):
    """Wraps a failure inside one stage of the transition pipeline.

    The original exception is kept as ``__cause__``.
    """

    def __init__(self, stage, error):
        super().__init__(f"stage '{stage}' failed: {error}")
        self.stage = stage
        self.error = error
