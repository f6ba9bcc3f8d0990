"""Exception types shared across the package."""


class PhotostyleError(Exception):
    """Base class for all errors raised by this package."""


class ShapeError(PhotostyleError):
    """Tensor shapes are incompatible for the requested operation."""

    def __init__(self, message, expected=None, got=None):
        if expected is not None or got is not None:
            message = f"{message} (expected {expected}, got {got})"
        super().__init__(message)
        self.expected = expected
        self.got = got


class WeightFormatError(PhotostyleError):
    """Weight file has the wrong magic bytes or an unsupported version."""


class WeightShapeError(PhotostyleError):
    """A layer in the weight file does not match the expected architecture."""


class WeightTruncatedError(PhotostyleError):
    """Weight file ended before all layers were read."""

    def __init__(self, layer):
        super().__init__(f"weight file truncated while reading layer {layer!r}")
        self.layer = layer


class PaletteError(PhotostyleError):
    """Palette file is empty or malformed."""


class UnknownColorError(PhotostyleError):
    """A segmentation pixel uses a color that is not in the palette."""

    def __init__(self, color, x, y):
        super().__init__(
            f"segmentation color {color} at pixel (x={x}, y={y}) is not in the palette"
        )
        self.color = color
        self.position = (x, y)


class UnknownWordError(PhotostyleError):
    """A class word is missing from the taxonomy (after substitutions)."""

    def __init__(self, word):
        super().__init__(f"word {word!r} is not in the taxonomy")
        self.word = word


class ClassTableMismatchError(PhotostyleError):
    """Content and style class tables differ; semantic grouping was skipped."""


class NumericalError(PhotostyleError):
    """Optimization produced a non-finite value."""

    def __init__(self, message, iteration=None):
        if iteration is not None:
            message = f"{message} (iteration {iteration})"
        super().__init__(message)
        self.iteration = iteration


class InputError(PhotostyleError):
    """A user-supplied file or parameter is invalid."""


class MemoryLimitError(PhotostyleError):
    """Image exceeds the configured size limit for Laplacian construction."""
