"""Explicit shape regression: cascaded random-fern regression of landmark shapes."""

from .cascade import (
    ESRModel,
    StageRegressor,
    TestParams,
    TrainParams,
    apply_stage_regressor,
    combine_multiple_results,
    initialize,
    learn_stage_regressor,
    predict,
    predict_one,
    train,
)
from .estimator import ShapeRegressor
from .fern import Fern
from .geometry import SimilarityTransform, align_similarity, compute_mean_shape

__version__ = "0.1.0"

__all__ = [
    "ESRModel", "Fern", "ShapeRegressor", "SimilarityTransform", "StageRegressor", "TestParams",
    "TrainParams", "align_similarity", "apply_stage_regressor", "combine_multiple_results",
    "compute_mean_shape", "initialize", "learn_stage_regressor", "predict", "predict_one", "train",
]
