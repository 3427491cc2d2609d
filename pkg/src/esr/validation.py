"""Input checks shared by the estimator and the CLI."""

from __future__ import annotations

import numbers

import numpy as np


def check_images(X) -> list:
    """Return a list of 2-D grayscale arrays.

    Accepts a sequence of 2-D arrays (sizes may differ) or a 3-D stack.
    """
    if isinstance(X, np.ndarray) and X.ndim == 3:
        X = list(X)
    images = []
    for i, img in enumerate(X):
        arr = np.asarray(img)
        if arr.ndim != 2:
            raise ValueError(f"image {i} must be 2-D grayscale, got shape {arr.shape}")
        if arr.shape[0] < 1 or arr.shape[1] < 1:
            raise ValueError(f"image {i} is empty")
        if not np.issubdtype(arr.dtype, np.number) or not np.all(np.isfinite(arr)):
            raise ValueError(f"image {i} must hold finite numbers")
        images.append(arr)
    if not images:
        raise ValueError("at least one image is required")
    return images


def check_shapes(y, n_samples: int | None = None, n_fp: int | None = None) -> np.ndarray:
    """Coerce landmarks to ``(n, n_fp, 2)``; flat ``(n, 2 * n_fp)`` rows are accepted."""
    arr = np.asarray(y, dtype=np.float64)
    if arr.ndim == 2:
        if arr.shape[1] % 2:
            raise ValueError("flat shape rows need an even length")
        arr = arr.reshape(arr.shape[0], -1, 2)
    if arr.ndim != 3 or arr.shape[2] != 2:
        raise ValueError(f"shapes must be (n, n_fp, 2), got {arr.shape}")
    if arr.shape[1] < 2:
        raise ValueError("shapes need at least 2 landmarks")
    if n_samples is not None and arr.shape[0] != n_samples:
        raise ValueError(f"{arr.shape[0]} shapes for {n_samples} images")
    if n_fp is not None and arr.shape[1] != n_fp:
        raise ValueError(f"expected {n_fp} landmarks, got {arr.shape[1]}")
    if not np.all(np.isfinite(arr)):
        raise ValueError("shape coordinates must be finite")
    return arr


def check_boxes(boxes, n_samples: int):
    if boxes is None:
        return None
    boxes = list(boxes)
    if len(boxes) != n_samples:
        raise ValueError(f"{len(boxes)} boxes for {n_samples} images")
    out = []
    for b in boxes:
        if b is None:
            out.append(None)
            continue
        b = tuple(float(v) for v in b)
        if len(b) != 4 or b[2] <= 0 or b[3] <= 0:
            raise ValueError(f"box must be (x, y, w, h) with positive size, got {b}")
        out.append(b)
    return out


def check_seed(random_state) -> int:
    """Integer seed from ``None``, an int, or a numpy generator."""
    if random_state is None:
        return int(np.random.SeedSequence().generate_state(1)[0])
    if isinstance(random_state, numbers.Integral):
        return int(random_state)
    if isinstance(random_state, np.random.Generator):
        return int(random_state.integers(2 ** 32))
    if isinstance(random_state, np.random.RandomState):
        return int(random_state.randint(2 ** 31))
    raise ValueError(f"cannot seed from {random_state!r}")
