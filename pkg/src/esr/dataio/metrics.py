"""Alignment error and evaluation reports."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..cascade import ESRModel, TestParams, predict

DEFAULT_THRESHOLDS = tuple(np.round(np.linspace(0.0, 0.2, 41), 6)) + (float("inf"),)


def alignment_error(pred, truth, normalizer_pair=(0, 1)) -> np.ndarray:
    """``||S - S_hat||_2 / (n_fp * d)`` per shape.

    ``d`` is the distance between the two landmarks of ``normalizer_pair`` in
    the ground truth, or 1 when ``normalizer_pair`` is ``None``.
    """
    pred = np.asarray(pred, dtype=np.float64)
    truth = np.asarray(truth, dtype=np.float64)
    if pred.ndim == 2:
        pred, truth = pred[None], truth[None]
    if pred.shape != truth.shape:
        raise ValueError(f"prediction {pred.shape} vs ground truth {truth.shape}")
    n_fp = truth.shape[1]
    raw = np.linalg.norm((pred - truth).reshape(len(pred), -1), axis=1) / n_fp
    if normalizer_pair is None:
        return raw
    i, j = normalizer_pair
    d = np.linalg.norm(truth[:, i] - truth[:, j], axis=1)
    if np.any(d <= 0):
        raise ValueError(f"normalizing landmarks {i} and {j} coincide")
    return raw / d


def threshold_curve(errors, thresholds=DEFAULT_THRESHOLDS) -> np.ndarray:
    """Fraction of ``errors`` strictly below each threshold."""
    errors = np.asarray(errors, dtype=np.float64)
    return np.array([np.mean(errors < t) for t in thresholds])


@dataclass
class EvalReport:
    errors: np.ndarray
    raw_errors: np.ndarray
    thresholds: tuple
    fractions: np.ndarray
    normalizer_pair: tuple | None

    @property
    def mean(self) -> float:
        return float(np.mean(self.errors))

    @property
    def median(self) -> float:
        return float(np.median(self.errors))

    @classmethod
    def from_predictions(cls, pred, truth, normalizer_pair=(0, 1), thresholds=DEFAULT_THRESHOLDS):
        err = alignment_error(pred, truth, normalizer_pair)
        raw = alignment_error(pred, truth, None)
        return cls(err, raw, tuple(thresholds), threshold_curve(err, thresholds), normalizer_pair)

    def to_text(self) -> str:
        pair = "none" if self.normalizer_pair is None else f"{self.normalizer_pair[0]},{self.normalizer_pair[1]}"
        lines = [
            f"n_images={len(self.errors)}",
            f"normalizer_pair={pair}",
            f"mean={self.mean:.9g}",
            f"median={self.median:.9g}",
            f"raw_mean={float(np.mean(self.raw_errors)):.9g}",
            f"raw_median={float(np.median(self.raw_errors)):.9g}",
        ]
        lines += [f"threshold={t:.9g} fraction={f:.9g}" for t, f in zip(self.thresholds, self.fractions)]
        lines += [f"image={i} error={e:.9g} raw_error={r:.9g}"
                  for i, (e, r) in enumerate(zip(self.errors, self.raw_errors))]
        return "\n".join(lines) + "\n"


def evaluate(model: ESRModel, dataset, test_params: TestParams = TestParams(), normalizer_pair=(0, 1),
             thresholds=DEFAULT_THRESHOLDS, seed: int = 0) -> EvalReport:
    """Predict every image of ``dataset`` and score against its landmarks."""
    pred = predict(model, dataset.images, test_params, rng=seed, boxes=dataset.boxes)
    return EvalReport.from_predictions(pred, dataset.shapes, normalizer_pair, thresholds)
