"""Exception hierarchy shared across the toolkit."""


class VisirisError(Exception):
    """Base class for all toolkit errors."""


class ImageFormatError(VisirisError):
    """Raised for unreadable or unsupported image files."""


class GeometryError(VisirisError):
    """Raised for invalid circle/box geometry (empty crop, pupil >= iris, ...)."""


class ShapeError(VisirisError):
    """Raised when array extents or channel counts do not match."""


class SequencingError(VisirisError):
    """Raised when a detection stream violates frame ordering."""


class WeightFormatError(VisirisError):
    """Raised for malformed weight files or topology mismatches."""


class TemplateFormatError(VisirisError):
    """Raised for malformed or truncated template files."""


class BoundaryFitError(VisirisError):
    """Raised when circle fitting cannot find supported boundaries."""


class NoOverlapError(VisirisError):
    """Raised when two templates share no valid bits at any shift."""


class ConfigError(VisirisError):
    """Raised for invalid configuration values or files."""


class ProtocolError(VisirisError):
    """Raised when an evaluation protocol cannot be satisfied by the data."""


class GalleryError(VisirisError):
    """Raised for enrollment store problems (duplicates, missing subjects)."""


class PipelineError(VisirisError):
    """Raised when a pipeline stage fails; carries the stage name."""

    def __init__(self, stage: str, message: str):
        super().__init__(f"{stage}: {message}")
        self.stage = stage


class QualityGateError(VisirisError):
    """Raised when an image fails the quality gate; carries the failures.

    Each failure is a (metric name, value, threshold) triple, in report
    field order.
    """

    def __init__(self, failures):
        self.failures = tuple(failures)
        names = ", ".join(name for name, _, _ in self.failures)
        super().__init__(f"quality gate failed: {names}")
