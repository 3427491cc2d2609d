"""Shape-indexed pixel sampling.

A pixel is addressed by a landmark index plus an offset expressed in the
mean-shape frame. For a given image shape the offset is brought back to image
coordinates through the inverse of the shape's normalizing transform, so the
same local coordinate hits the "same" spot on differently posed objects.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .geometry import align_linear_batch, inverse_linear, rotate_scale


@dataclass(frozen=True)
class LocalCoordinates:
    """``P`` shape-indexed sample locations.

    Attributes
    ----------
    landmarks : ndarray of int, shape (P,)
        0-based anchor landmark of each pixel.
    offsets : ndarray of float, shape (P, 2)
        ``(dx, dy)`` in the mean-shape frame.
    """

    landmarks: np.ndarray
    offsets: np.ndarray

    def __post_init__(self):
        lm = np.asarray(self.landmarks, dtype=np.intp)
        off = np.asarray(self.offsets, dtype=np.float64).reshape(-1, 2)
        if lm.ndim != 1 or lm.shape[0] != off.shape[0]:
            raise ValueError("landmarks and offsets must have matching length")
        if np.any(lm < 0):
            raise ValueError("landmark indices must be non-negative")
        object.__setattr__(self, "landmarks", lm)
        object.__setattr__(self, "offsets", off)

    def __len__(self):
        return self.landmarks.shape[0]


def generate_local_coordinates(n_fp: int, p: int, kappa: float, rng: np.random.Generator) -> LocalCoordinates:
    """Draw ``p`` anchors uniformly over landmarks and offsets uniformly in ``[-kappa, kappa]^2``."""
    if n_fp < 1:
        raise ValueError("n_fp must be >= 1")
    if p < 1:
        raise ValueError("p must be >= 1")
    if not kappa > 0:
        raise ValueError("kappa must be > 0")
    landmarks = rng.integers(0, n_fp, size=p)
    offsets = rng.uniform(-kappa, kappa, size=(p, 2))
    return LocalCoordinates(landmarks, offsets)


def global_positions(shapes: np.ndarray, coords: LocalCoordinates, mean: np.ndarray) -> np.ndarray:
    """Image-space sample positions, ``(n, P, 2)``, for a stack of shapes."""
    if shapes.ndim == 2:
        shapes = shapes[None]
    if coords.landmarks.size and coords.landmarks.max() >= shapes.shape[1]:
        raise IndexError("local coordinate refers to a landmark the shapes do not have")
    a, b = align_linear_batch(shapes, mean)
    ia, ib = inverse_linear(a, b)
    delta = rotate_scale(ia[:, None], ib[:, None], coords.offsets[None, :, :])
    return shapes[:, coords.landmarks, :] + delta


def sample_pixels(image: np.ndarray, positions: np.ndarray) -> np.ndarray:
    """Nearest-pixel intensities at ``(..., 2)`` positions, clamped to the border."""
    h, w = image.shape
    # floor(x + 0.5): round half up, symmetric under integer translations
    col = np.clip(np.floor(positions[..., 0] + 0.5), 0, w - 1).astype(np.intp)
    row = np.clip(np.floor(positions[..., 1] + 0.5), 0, h - 1).astype(np.intp)
    return image[row, col].astype(np.float64)


def extract_shape_indexed_pixels(images, shapes, coords: LocalCoordinates, mean: np.ndarray,
                                 image_index=None) -> np.ndarray:
    """Sample the ``N x P`` pixel matrix ``rho``.

    Parameters
    ----------
    images : sequence of 2-D arrays
        Grayscale images, indexed ``[row, col]``.
    shapes : ndarray, shape (N, n_fp, 2)
        Current shape estimate of each sample.
    coords : LocalCoordinates
    mean : ndarray, shape (n_fp, 2)
    image_index : array of int, optional
        ``images[image_index[i]]`` is the image of sample ``i``; lets augmented
        replicas share one image. Defaults to ``arange(N)``.
    """
    shapes = np.asarray(shapes, dtype=np.float64)
    if shapes.ndim == 2:
        shapes = shapes[None]
    n = shapes.shape[0]
    if image_index is None:
        if len(images) != n:
            raise ValueError(f"{len(images)} images for {n} shapes")
        image_index = np.arange(n)
    image_index = np.asarray(image_index)
    pos = global_positions(shapes, coords, mean)
    rho = np.empty((n, len(coords)), dtype=np.float64)
    for k in np.unique(image_index):
        rows = np.flatnonzero(image_index == k)
        rho[rows] = sample_pixels(np.asarray(images[k]), pos[rows])
    return rho


def pixel_difference_feature(rho: np.ndarray, m: int, n: int) -> np.ndarray:
    p = rho.shape[1]
    if not (0 <= m < p and 0 <= n < p):
        raise IndexError(f"pixel index out of range for {p} pixels")
    return rho[:, m] - rho[:, n]


def pixel_difference_features(rho: np.ndarray, pairs: np.ndarray) -> np.ndarray:
    """``(N, F)`` differences for ``F`` ``(m, n)`` pairs."""
    pairs = np.asarray(pairs, dtype=np.intp).reshape(-1, 2)
    return rho[:, pairs[:, 0]] - rho[:, pairs[:, 1]]
