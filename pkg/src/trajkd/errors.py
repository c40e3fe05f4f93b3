"""Exception hierarchy shared across the package."""


class TrajkdError(Exception):
    """Base class for all package errors."""


class IngestError(TrajkdError):
    """Unrecoverable problem in a row table (e.g. duplicate (object_id, frame))."""


class FeatureError(TrajkdError):
    """A feature is undefined or unconfigurable for a trajectory."""

    def __init__(self, message, object_id=None):
        super().__init__(message)
        self.object_id = object_id


class FilterError(TrajkdError):
    """Invalid filter specification or inapplicable filter."""


class ClusteringError(TrajkdError):
    """Invalid clustering configuration or degenerate input."""


class PipelineError(TrajkdError):
    """Invalid step, broken group reference, or inconsistent record."""


class StepSkipped(PipelineError):
    """Raised internally when a replayed step cannot be applied."""
