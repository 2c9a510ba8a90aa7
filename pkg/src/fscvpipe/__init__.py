"""Saliency-driven pipeline for release identification in FSCV color maps.

The package covers the classical (non-learned) half of the workflow:
synthetic data generation, background subtraction and false-coloring,
zone/patch extraction, five saliency detectors with mask/ROI products,
fold-respecting baseline scoring, sum-rule fusion, and grouped
cross-validated evaluation. ``fscvpipe.cli`` wires it all into the
``fscvpipe`` command.
"""
from .errors import (
    ConvergenceError,
    DataIntegrityError,
    EmptyRoiError,
    IngestionError,
    InvalidArgumentError,
    PipelineError,
    ProtocolViolationError,
    UndefinedMetricError,
)

__version__ = "0.1.0"

__all__ = [
    "ConvergenceError",
    "DataIntegrityError",
    "EmptyRoiError",
    "IngestionError",
    "InvalidArgumentError",
    "PipelineError",
    "ProtocolViolationError",
    "UndefinedMetricError",
    "__version__",
]
