"""Random fern: the weak regressor boosted inside each cascade stage."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

MAX_FEATURES = 16


class DegenerateFeatureError(ValueError):
    """Raised when selected features carry no range to threshold."""


@dataclass(frozen=True)
class Fern:
    """``F`` thresholded pixel-difference tests indexing ``2**F`` shape increments.

    Attributes
    ----------
    pairs : ndarray of int, shape (F, 2)
        ``(m, n)`` pixel indices; feature ``f`` is ``rho[m] - rho[n]``.
    thresholds : ndarray, shape (F,)
    bin_outputs : ndarray, shape (2**F, n_fp, 2)
        Increment in the mean-shape frame returned for each bin.
    """

    pairs: np.ndarray
    thresholds: np.ndarray
    bin_outputs: np.ndarray

    def __post_init__(self):
        pairs = np.asarray(self.pairs, dtype=np.intp).reshape(-1, 2)
        thr = np.asarray(self.thresholds, dtype=np.float64).ravel()
        out = np.asarray(self.bin_outputs, dtype=np.float64)
        f = pairs.shape[0]
        if thr.shape[0] != f:
            raise ValueError(f"{f} feature pairs but {thr.shape[0]} thresholds")
        if not 1 <= f <= MAX_FEATURES:
            raise ValueError(f"a fern needs 1..{MAX_FEATURES} features, got {f}")
        if out.ndim == 2:
            out = out.reshape(out.shape[0], -1, 2)
        if out.ndim != 3 or out.shape[0] != 2 ** f or out.shape[2] != 2:
            raise ValueError(f"bin_outputs must be (2**F, n_fp, 2), got {out.shape}")
        if not np.all(np.isfinite(out)):
            raise ValueError("bin outputs must be finite")
        object.__setattr__(self, "pairs", pairs)
        object.__setattr__(self, "thresholds", thr)
        object.__setattr__(self, "bin_outputs", out)

    @property
    def n_features(self) -> int:
        return self.pairs.shape[0]

    def predict(self, features: np.ndarray) -> np.ndarray:
        """Outputs for an ``(N, F)`` feature block, ``(N, n_fp, 2)``."""
        return self.bin_outputs[bin_index(features, self.thresholds)]


def bin_index(features, thresholds) -> np.ndarray | int:
    """Bin of each sample: bit ``f`` is set iff ``features[..., f] >= thresholds[f]``.

    Accepts a single ``(F,)`` feature vector (returns an int) or an ``(N, F)``
    block (returns an int array).
    """
    features = np.asarray(features, dtype=np.float64)
    thresholds = np.asarray(thresholds, dtype=np.float64)
    if features.shape[-1] != thresholds.shape[0]:
        raise ValueError(f"{features.shape[-1]} features for {thresholds.shape[0]} thresholds")
    weights = 1 << np.arange(thresholds.shape[0], dtype=np.int64)
    idx = (features >= thresholds).astype(np.int64) @ weights
    if features.ndim == 1:
        return int(idx)
    return idx


def shrinkage_factor(count, beta: float):
    """``1 / (1 + beta / count)``; zero where ``count == 0``."""
    count = np.asarray(count, dtype=np.float64)
    with np.errstate(divide="ignore", invalid="ignore"):
        return np.where(count > 0, 1.0 / (1.0 + beta / count), 0.0)


def compute_bin_outputs(targets, assignments, n_bins: int, beta: float) -> np.ndarray:
    """Shrunken per-bin mean of ``targets``.

    Parameters
    ----------
    targets : ndarray, shape (N, ...)
    assignments : ndarray of int, shape (N,)
        Bin of each target, in ``[0, n_bins)``.
    n_bins : int
    beta : float
        Shrinkage strength, ``>= 0``. ``0`` gives the plain bin average.

    Returns
    -------
    ndarray, shape (n_bins, ...)
        Empty bins get a zero vector.
    """
    if beta < 0:
        raise ValueError("beta must be >= 0")
    targets = np.asarray(targets, dtype=np.float64)
    assignments = np.asarray(assignments, dtype=np.intp)
    if assignments.size and (assignments.min() < 0 or assignments.max() >= n_bins):
        raise ValueError("bin assignment out of range")
    flat = targets.reshape(targets.shape[0], -1)
    counts = np.bincount(assignments, minlength=n_bins)
    sums = np.zeros((n_bins, flat.shape[1]))
    np.add.at(sums, assignments, flat)
    with np.errstate(invalid="ignore", divide="ignore"):
        means = np.where(counts[:, None] > 0, sums / np.maximum(counts, 1)[:, None], 0.0)
    out = means * shrinkage_factor(counts, beta)[:, None]
    return out.reshape((n_bins,) + targets.shape[1:])


def sample_thresholds(c: float, f: int, rng: np.random.Generator) -> np.ndarray:
    """``f`` thresholds drawn uniformly from ``[-0.2c, 0.2c]``."""
    if not c > 0:
        raise DegenerateFeatureError(f"feature range must be positive, got {c}")
    if f < 1:
        raise ValueError("f must be >= 1")
    return rng.uniform(-0.2 * c, 0.2 * c, size=f)


def apply_fern(fern: Fern, features) -> np.ndarray:
    """Increment for one sample given its ``F`` features in the fern's pair order."""
    return fern.bin_outputs[bin_index(np.asarray(features, dtype=np.float64), fern.thresholds)].copy()
