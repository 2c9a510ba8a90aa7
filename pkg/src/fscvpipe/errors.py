"""Exception types shared across the pipeline."""


class PipelineError(Exception):
    """Base class for every error raised by this package."""


class InvalidArgumentError(PipelineError, ValueError):
    """A caller violated an operation's precondition."""


class EmptyRoiError(PipelineError):
    """Every row or column was removed while extracting a region of interest."""


class ConvergenceError(PipelineError):
    """An iterative solver ran out of iterations.

    Carries the last residual so callers can report how far off it was.
    """

    def __init__(self, message: str, residual: float):
        super().__init__(f"{message} (residual={residual:.3e})")
        self.residual = residual


class DataIntegrityError(PipelineError):
    """Score/manifest files disagree with each other."""


class ProtocolViolationError(PipelineError):
    """An evaluation protocol rule was broken (fold leakage, bad plan)."""


class UndefinedMetricError(PipelineError):
    """A metric has no defined value for the given label set."""


class IngestionError(PipelineError):
    """A dataset file failed validation. ``row`` is 1-based when known."""

    def __init__(self, message: str, row: int | None = None):
        if row is not None:
            message = f"row {row}: {message}"
        super().__init__(message)
        self.row = row
