from .images import ImageFormatError, draw_landmarks, load_image, load_ppm, save_pgm, save_ppm
from .landmarks import (
    Dataset,
    DatasetEntry,
    LandmarkFormatError,
    list_dataset,
    load_dataset,
    load_landmarks,
    save_landmarks,
)
from .metrics import EvalReport, alignment_error, evaluate, threshold_curve
from .model_io import ModelFormatError, load_model, save_model
from .synthetic import generate_synthetic_dataset, make_synthetic_samples

__all__ = [
    "Dataset", "DatasetEntry", "EvalReport", "ImageFormatError", "LandmarkFormatError",
    "ModelFormatError", "alignment_error", "draw_landmarks", "evaluate",
    "generate_synthetic_dataset", "list_dataset", "load_dataset", "load_image",
    "load_landmarks", "load_model", "load_ppm", "make_synthetic_samples", "save_landmarks",
    "save_model", "save_pgm", "save_ppm", "threshold_curve",
]
