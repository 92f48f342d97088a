"""Transductive and inductive conformal prediction for k-nearest-neighbours regression."""

__version__ = "0.1.0"

from .data import Dataset, SplitPlan, SyntheticSpec, generate_synthetic, load_csv, normalize_minmax
from .errors import ConfigurationError, DataError
from .icp import CalibrationModel, calibrate, predict_interval
from .nonconformity import MeasureConfig, MeasureKind
from .regions import PredictiveRegion
from .tcp import TransductiveRegressor

__all__ = [
    "CalibrationModel",
    "ConfigurationError",
    "DataError",
    "Dataset",
    "MeasureConfig",
    "MeasureKind",
    "PredictiveRegion",
    "SplitPlan",
    "SyntheticSpec",
    "TransductiveRegressor",
    "calibrate",
    "generate_synthetic",
    "load_csv",
    "normalize_minmax",
    "predict_interval",
]
