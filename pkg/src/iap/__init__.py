"""Rotation-invariant spatial and frequency features for hyperspectral pixels."""

from .classify import ForestParams, Metrics, evaluate, nn_classify, rf_classify
from .errors import IapError, NumericError, ValidationError
from .fif import FifLayout, extract_fif
from .grouping import group_bands, max_gradient_field
from .profile import IapConfig, assemble_iap, column_map, extract_iap, reduce
from .sif import SlicParams, extract_sif, slic

__all__ = [
    "ForestParams", "Metrics", "evaluate", "nn_classify", "rf_classify",
    "IapError", "NumericError", "ValidationError", "FifLayout", "extract_fif",
    "group_bands", "max_gradient_field", "IapConfig", "assemble_iap", "column_map",
    "extract_iap", "reduce", "SlicParams", "extract_sif", "slic",
]
