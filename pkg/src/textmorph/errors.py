"""Error types shared across the package.

Every raisable condition has its own class so callers can catch precisely.
All inherit from TextmorphError.
"""


class TextmorphError(Exception):
    """Base class for all textmorph errors."""


class ZeroWeightSum(TextmorphError):
    """Weighted centroid requested with weights summing to zero."""


class DegenerateConfiguration(TextmorphError):
    """Control points do not determine a transform.

    Raised when the affine moment matrix is singular (relative determinant
    below 1e-12) or when the similarity/rigid normalizer falls below 1e-12.
    """


class DimensionMismatch(TextmorphError):
    """Image dimensions do not match the warp grid they are used with."""


class InvalidDimensions(TextmorphError):
    """Width, height, patch count, or grid step outside the valid range."""


class LengthMismatch(TextmorphError):
    """Paired sequences of different lengths (states vs layouts, preds vs gts)."""


class EmptyGroundTruth(TextmorphError):
    """A normalized metric was asked to divide by an empty ground truth."""


class UnknownCharacter(TextmorphError):
    """Text contains a character outside the glyph task's alphabet."""


class DoesNotFit(TextmorphError):
    """Requested text cannot be rendered at the given canvas size."""
