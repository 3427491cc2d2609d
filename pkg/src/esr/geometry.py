"""Shapes, 2-D similarity transforms and Procrustes alignment.

A shape is stored as an ``(n_fp, 2)`` float array of ``(x, y)`` landmarks in
pixel coordinates; ``shape.ravel()`` gives the flat ``[x1, y1, x2, y2, ...]``
layout used in files. Batched helpers take ``(n, n_fp, 2)`` stacks.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np


class DegenerateShapeError(ValueError):
    """Raised when a shape (or transform) has no usable spatial extent."""


@dataclass(frozen=True)
class SimilarityTransform:
    """``p -> [[a, -b], [b, a]] @ p + (tx, ty)``."""

    a: float = 1.0
    b: float = 0.0
    tx: float = 0.0
    ty: float = 0.0

    @property
    def linear(self) -> np.ndarray:
        return np.array([[self.a, -self.b], [self.b, self.a]])

    @property
    def scale(self) -> float:
        return float(np.hypot(self.a, self.b))

    @property
    def angle(self) -> float:
        return float(np.arctan2(self.b, self.a))

    @classmethod
    def from_params(cls, scale=1.0, angle=0.0, tx=0.0, ty=0.0) -> "SimilarityTransform":
        return cls(scale * np.cos(angle), scale * np.sin(angle), tx, ty)

    def as_tuple(self):
        return (self.a, self.b, self.tx, self.ty)


IDENTITY = SimilarityTransform()


def as_shape(s, n_fp=None) -> np.ndarray:
    """Coerce a flat or ``(n_fp, 2)`` sequence into a validated ``(n_fp, 2)`` array."""
    arr = np.asarray(s, dtype=np.float64)
    if arr.ndim == 1:
        if arr.size % 2:
            raise ValueError(f"flat shape needs an even length, got {arr.size}")
        arr = arr.reshape(-1, 2)
    if arr.ndim != 2 or arr.shape[1] != 2:
        raise ValueError(f"shape must be (n_fp, 2) or flat, got array of shape {arr.shape}")
    if arr.shape[0] < 2:
        raise ValueError("a shape needs at least 2 landmarks")
    if n_fp is not None and arr.shape[0] != n_fp:
        raise ValueError(f"expected {n_fp} landmarks, got {arr.shape[0]}")
    if not np.all(np.isfinite(arr)):
        raise ValueError("shape coordinates must be finite")
    return arr


def _align_coefficients(src: np.ndarray, dst: np.ndarray):
    """Least-squares similarity coefficients for stacks ``(..., n_fp, 2)``."""
    src_c = src.mean(axis=-2)
    dst_c = dst.mean(axis=-2)
    xs = src[..., 0] - src_c[..., None, 0]
    ys = src[..., 1] - src_c[..., None, 1]
    xd = dst[..., 0] - dst_c[..., None, 0]
    yd = dst[..., 1] - dst_c[..., None, 1]
    norm = np.sum(xs * xs + ys * ys, axis=-1)
    if np.any(norm <= 0.0):
        raise DegenerateShapeError("source shape has all landmarks coincident")
    a = np.sum(xs * xd + ys * yd, axis=-1) / norm
    b = np.sum(xs * yd - ys * xd, axis=-1) / norm
    tx = dst_c[..., 0] - (a * src_c[..., 0] - b * src_c[..., 1])
    ty = dst_c[..., 1] - (b * src_c[..., 0] + a * src_c[..., 1])
    return a, b, tx, ty


def align_similarity(src, dst) -> SimilarityTransform:
    """Similarity ``M`` minimizing ``||dst - M(src)||``.

    Closed form: with both shapes centred, ``a`` and ``b`` are the dot and
    cross products of the centred coordinates divided by the squared norm of
    the centred source; translation then maps centroid onto centroid.

    Raises
    ------
    DegenerateShapeError
        If every landmark of ``src`` coincides.
    """
    src = as_shape(src)
    dst = as_shape(dst, src.shape[0])
    a, b, tx, ty = _align_coefficients(src, dst)
    return SimilarityTransform(float(a), float(b), float(tx), float(ty))


def align_linear_batch(shapes: np.ndarray, mean: np.ndarray):
    """Per-shape ``(a, b)`` of the transforms aligning each of ``shapes`` to ``mean``.

    Returns two ``(n,)`` arrays; translation is dropped because every caller
    applies the linear part to a displacement.
    """
    a, b, _, _ = _align_coefficients(shapes, np.broadcast_to(mean, shapes.shape))
    return a, b


def rotate_scale(a, b, vectors: np.ndarray) -> np.ndarray:
    """Apply ``[[a, -b], [b, a]]`` to ``(..., 2)`` vectors.

    ``a`` and ``b`` broadcast against ``vectors[..., 0]``.
    """
    x = vectors[..., 0]
    y = vectors[..., 1]
    return np.stack([a * x - b * y, b * x + a * y], axis=-1)


def inverse_linear(a, b):
    """Coefficients of the inverse of the linear part ``[[a, -b], [b, a]]``."""
    d = a * a + b * b
    return a / d, -b / d


def apply_transform(m: SimilarityTransform, s) -> np.ndarray:
    s = as_shape(s)
    out = rotate_scale(m.a, m.b, s)
    out[:, 0] += m.tx
    out[:, 1] += m.ty
    return out


def invert_transform(m: SimilarityTransform) -> SimilarityTransform:
    d = m.a * m.a + m.b * m.b
    if not d > 0.0:
        raise DegenerateShapeError("transform has zero scale and cannot be inverted")
    ia, ib = m.a / d, -m.b / d
    return SimilarityTransform(ia, ib, -(ia * m.tx - ib * m.ty), -(ib * m.tx + ia * m.ty))


def compose(outer: SimilarityTransform, inner: SimilarityTransform) -> SimilarityTransform:
    """``outer(inner(p))`` as a single transform."""
    a = outer.a * inner.a - outer.b * inner.b
    b = outer.b * inner.a + outer.a * inner.b
    tx = outer.a * inner.tx - outer.b * inner.ty + outer.tx
    ty = outer.b * inner.tx + outer.a * inner.ty + outer.ty
    return SimilarityTransform(a, b, tx, ty)


def rms_scale(s: np.ndarray) -> float:
    """Root-mean-square landmark distance from the centroid."""
    c = s - s.mean(axis=0)
    return float(np.sqrt(np.mean(np.sum(c * c, axis=1))))


def _to_reference(s: np.ndarray) -> np.ndarray:
    c = s - s.mean(axis=0)
    r = rms_scale(s)
    if r <= 0.0:
        raise DegenerateShapeError("shape has all landmarks coincident")
    return c / r


def compute_mean_shape(shapes, tol: float = 1e-8, max_iter: int = 100) -> np.ndarray:
    """Generalized Procrustes mean of ``shapes``.

    The mean lives in a reference frame centred at the origin with unit RMS
    distance from the centroid. Starting from the first shape, each shape is
    aligned to the current mean, the aligned shapes are averaged and the
    average is renormalized, until the mean moves less than ``tol``.

    Parameters
    ----------
    shapes : sequence of array-like
        Shapes with a common number of landmarks.
    tol : float
        Convergence threshold on the max-abs coordinate change of the mean.
    max_iter : int
        Iteration cap.

    Returns
    -------
    ndarray of shape (n_fp, 2)
    """
    stack = np.asarray(shapes, dtype=np.float64)
    if stack.size == 0 or len(stack) == 0:
        raise ValueError("compute_mean_shape needs at least one shape")
    if stack.ndim == 2:
        stack = stack.reshape(stack.shape[0], -1, 2)
    for s in stack:
        as_shape(s, stack.shape[1])

    mean = _to_reference(stack[0])
    for _ in range(max_iter):
        a, b, tx, ty = _align_coefficients(stack, np.broadcast_to(mean, stack.shape))
        aligned = rotate_scale(a[:, None], b[:, None], stack)
        aligned[..., 0] += tx[:, None]
        aligned[..., 1] += ty[:, None]
        new = aligned.mean(axis=0)
        # pin orientation to the previous mean so renormalization cannot drift
        new = apply_transform(align_similarity(new, mean), new)
        new = _to_reference(new)
        moved = np.max(np.abs(new - mean))
        mean = new
        if moved < tol:
            break
    return mean


def normalize_target(s_hat, s_prev, mean) -> np.ndarray:
    """Regression target ``M(s_hat - s_prev)`` in the mean-shape frame.

    ``M`` aligns ``s_prev`` to ``mean``; only its rotation-scale part acts on
    the difference since translation cancels.
    """
    s_prev = as_shape(s_prev)
    s_hat = as_shape(s_hat, s_prev.shape[0])
    m = align_similarity(s_prev, mean)
    return rotate_scale(m.a, m.b, s_hat - s_prev)


def normalize_targets_batch(s_hat: np.ndarray, s_prev: np.ndarray, mean: np.ndarray) -> np.ndarray:
    a, b = align_linear_batch(s_prev, mean)
    return rotate_scale(a[:, None], b[:, None], s_hat - s_prev)


def landmark_of(s, l: int) -> np.ndarray:
    """Coordinates ``(x, y)`` of landmark ``l`` (0-based)."""
    s = as_shape(s)
    if not 0 <= l < s.shape[0]:
        raise IndexError(f"landmark index {l} out of range for {s.shape[0]} landmarks")
    return s[l].copy()


def bounding_box(s: np.ndarray):
    """Axis-aligned ``(x, y, w, h)`` of a shape."""
    lo = s.min(axis=0)
    hi = s.max(axis=0)
    return (float(lo[0]), float(lo[1]), float(hi[0] - lo[0]), float(hi[1] - lo[1]))


def place_in_box(s: np.ndarray, box) -> np.ndarray:
    """Translate and scale ``s`` (per axis) so its bounding box fills ``box``."""
    bx, by, bw, bh = box
    sx, sy, sw, sh = bounding_box(s)
    if sw <= 0.0 or sh <= 0.0:
        raise DegenerateShapeError("shape has a flat bounding box")
    out = np.empty_like(s, dtype=np.float64)
    out[:, 0] = (s[:, 0] - sx) * (bw / sw) + bx
    out[:, 1] = (s[:, 1] - sy) * (bh / sh) + by
    return out
