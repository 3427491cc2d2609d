"""Synthetic deformable-shape images with known landmarks.

Each sample is a base template of landmarks posed by a random similarity and
deformed along three smooth modes. The image is a smooth background gradient
plus one Gaussian blob per landmark, each landmark with its own fixed
intensity, plus pixel noise.
"""

from __future__ import annotations

import os

import numpy as np

from .images import save_pgm
from .landmarks import DatasetEntry, save_landmarks

# template RMS radius as a fraction of the image side
TEMPLATE_SCALE = 0.2
BLOB_SIGMA = 0.09
BOX_JITTER = 0.03
MARGIN = 3.0


def base_shape(n_fp: int) -> np.ndarray:
    """Face-like template centred at the origin with unit RMS radius.

    Landmarks 0 and 1 are the "eyes", so their distance is a sensible error
    normalizer; the rest split between an outline ellipse and an inner arc.
    """
    if n_fp < 4:
        raise ValueError("synthetic shapes need n_fp >= 4")
    rest = n_fp - 2
    n_in = rest // 3
    n_out = rest - n_in
    pts = [(-0.35, -0.25), (0.35, -0.25)]
    ang = 2 * np.pi * (np.arange(n_out) + 0.25) / n_out
    pts += list(zip(0.8 * np.cos(ang), 1.0 * np.sin(ang)))
    if n_in:
        t = np.linspace(0.15 * np.pi, 0.85 * np.pi, n_in) if n_in > 1 else np.array([0.5 * np.pi])
        pts += list(zip(0.35 * np.cos(t), 0.05 + 0.4 * np.sin(t)))
    s = np.array(pts)
    s -= s.mean(axis=0)
    return s / np.sqrt(np.mean(np.sum(s * s, axis=1)))


def deformation_modes(template: np.ndarray) -> np.ndarray:
    """Three orthonormal smooth displacement fields, orthogonal to all similarity motions.

    Returns an array of shape (3, n_fp, 2).
    """
    x, y = template[:, 0], template[:, 1]
    zero = np.zeros_like(x)
    one = np.ones_like(x)
    similarity = [np.stack(v, 1).ravel() for v in ((one, zero), (zero, one), (x, y), (-y, x))]
    raw = [np.stack(v, 1).ravel() for v in ((zero, y * y), (x * y, zero), (x * x, -x * y))]
    q, _ = np.linalg.qr(np.stack(similarity + raw, axis=1))
    q = q[:, 4:]
    # QR leaves signs arbitrary across LAPACK builds
    q *= np.where(q[np.argmax(np.abs(q), axis=0), np.arange(3)] < 0, -1.0, 1.0)
    return q.T.reshape(3, -1, 2)


def landmark_intensities(n_fp: int) -> np.ndarray:
    """Fixed, distinct blob amplitude per landmark (some dark, some bright)."""
    amps = np.linspace(-90.0, 110.0, n_fp)
    order = np.argsort((np.arange(n_fp) * 7919) % n_fp, kind="stable")
    return amps[order]


def render(shape: np.ndarray, size: int, amplitudes: np.ndarray, blob_sigma: float,
           gradient: tuple, noise: np.ndarray | None) -> np.ndarray:
    rows, cols = np.mgrid[0:size, 0:size].astype(np.float64)
    g_amp, g_angle = gradient
    c = (size - 1) / 2
    img = 110.0 + g_amp * ((cols - c) * np.cos(g_angle) + (rows - c) * np.sin(g_angle)) / size
    for (x, y), amp in zip(shape, amplitudes):
        img += amp * np.exp(-((cols - x) ** 2 + (rows - y) ** 2) / (2 * blob_sigma ** 2))
    if noise is not None:
        img += noise
    return np.clip(np.rint(img), 0, 255).astype(np.uint8)


def make_synthetic_samples(count: int, n_fp: int = 29, image_size: int = 128, noise_sigma: float = 2.0,
                           seed: int = 7, mode_sigma: float = 0.12, fixed_pose: bool = False):
    """In-memory synthetic set.

    Parameters
    ----------
    mode_sigma : float
        Std of each deformation coefficient, as RMS per-landmark displacement
        relative to the template radius.
    fixed_pose : bool
        Use the identity pose (centred, template scale) and no box jitter.

    Returns
    -------
    images : list of uint8 arrays
    shapes : ndarray, shape (count, n_fp, 2)
    boxes : list of (x, y, w, h)
    """
    if count < 1:
        raise ValueError("count must be >= 1")
    rng = np.random.default_rng(seed)
    template = base_shape(n_fp)
    modes = deformation_modes(template)
    amps = landmark_intensities(n_fp)
    radius = TEMPLATE_SCALE * image_size
    images, shapes, boxes = [], [], []
    for _ in range(count):
        coef = rng.normal(0.0, mode_sigma * np.sqrt(n_fp), size=3)
        local = template + np.tensordot(coef, modes, axes=1)
        if fixed_pose:
            scale, angle = 1.0, 0.0
        else:
            scale = rng.uniform(0.8, 1.25)
            angle = np.deg2rad(rng.uniform(-25.0, 25.0))
        rot = np.array([[np.cos(angle), -np.sin(angle)], [np.sin(angle), np.cos(angle)]])
        posed = scale * radius * local @ rot.T
        lo, hi = posed.min(axis=0), posed.max(axis=0)
        t = np.empty(2)
        for k in range(2):
            low = MARGIN - lo[k]
            high = image_size - 1 - MARGIN - hi[k]
            if fixed_pose or high <= low:
                t[k] = (image_size - 1) / 2
            else:
                t[k] = rng.uniform(low, high)
        shape = posed + t
        gradient = (rng.uniform(-40.0, 40.0), rng.uniform(0, 2 * np.pi))
        noise = rng.normal(0.0, noise_sigma, size=(image_size, image_size)) if noise_sigma > 0 else None
        images.append(render(shape, image_size, amps, BLOB_SIGMA * scale * radius, gradient, noise))
        x0, y0 = shape.min(axis=0)
        w, h = shape.max(axis=0) - shape.min(axis=0)
        if not fixed_pose:
            jx, jy, jw, jh = rng.normal(0.0, BOX_JITTER, size=4)
            x0, y0, w, h = x0 + jx * w, y0 + jy * h, w * (1 + jw), h * (1 + jh)
        shapes.append(shape)
        boxes.append((float(x0), float(y0), float(w), float(h)))
    return images, np.stack(shapes), boxes


def generate_synthetic_dataset(count: int, n_fp: int, image_size: int, noise_sigma: float, seed: int,
                               out_dir, **kwargs) -> list[DatasetEntry]:
    """Write ``count`` ``.pgm``/``.pts`` pairs into ``out_dir``."""
    os.makedirs(out_dir, exist_ok=True)
    images, shapes, boxes = make_synthetic_samples(count, n_fp, image_size, noise_sigma, seed, **kwargs)
    entries = []
    for i, (img, s, box) in enumerate(zip(images, shapes, boxes)):
        stem = os.path.join(out_dir, f"{i:05d}")
        save_pgm(stem + ".pgm", img)
        save_landmarks(stem + ".pts", s, box)
        entries.append(DatasetEntry(stem + ".pgm", stem + ".pts", box))
    return entries
