"""Domain errors raised by the toolkit.

Every error carries a stable ``code`` (its class name) so callers and the
command line front end can report failures uniformly as ``ERROR <code>: <msg>``.
"""


class ToolkitError(Exception):
    """Base class for all domain errors."""

    @property
    def code(self) -> str:
        return type(self).__name__


# --- calibration / geometry ---

class FewerThanFourPairs(ToolkitError):
    """Homography estimation needs at least four point correspondences."""


class DegenerateConfiguration(ToolkitError):
    """Three of the given points are (numerically) collinear."""


class PointAtInfinity(ToolkitError):
    """A mapped point has a vanishing homogeneous scale."""


class NonPositiveScale(ToolkitError):
    """Pixel-per-meter scale must be strictly positive."""


class NonInvertibleHomography(ToolkitError):
    """The homography cannot be inverted."""


# --- perception ---

class EmptyDirtMask(ToolkitError):
    """No dirt pixels found where some were required."""


class MaskOutsideTable(ToolkitError):
    """Dirt mask pixels fall outside the table polygon."""


class AmbiguousColor(ToolkitError):
    """Mean dirt hue matches no configured dirt class."""


class DegenerateAxis(ToolkitError):
    """Principal axis of the dirt blob is undefined."""


class DegenerateFrameGeometry(ToolkitError):
    """Frame anchor points coincide, leaving orientations undefined."""


# --- mixture model ---

class NonSpdCovariance(ToolkitError):
    """A covariance matrix is not symmetric positive definite."""


class SingularPrecisionSum(ToolkitError):
    """Sum of frame precisions is singular; the Gaussian product is undefined."""


class InsufficientData(ToolkitError):
    """Too few data points to fit the requested number of components."""


class CollapsedComponent(ToolkitError):
    """A mixture component lost all responsibility mass during fitting."""


class UntrainedModel(ToolkitError):
    """The model has no fitted parameters."""


# --- simulator ---

class ParamsOutOfBounds(ToolkitError):
    """Scene spawn parameters are invalid or do not fit the table."""


class ZeroInitialArea(ToolkitError):
    """Initial dirty area is zero; the area metric is undefined."""


class ZeroInitialDistance(ToolkitError):
    """Initial dirt-to-corner distance is zero; the distance metric is undefined."""


# --- dataset files ---

class MissingFile(ToolkitError):
    """A file referenced by a manifest or argument does not exist."""


class SchemaVersionMismatch(ToolkitError):
    """A serialized artifact has an unsupported schema version."""


class InvariantViolation(ToolkitError):
    """A structural invariant of a data type was violated."""
