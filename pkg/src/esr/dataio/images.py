"""Netpbm grayscale input (P2/P5) and PGM/PPM output.

Images are ``uint8`` arrays indexed ``[row, col]``.
"""

from __future__ import annotations

import os

import numpy as np


class ImageFormatError(ValueError):
    pass


def _tokens(data: bytes, count: int, pos: int):
    """Read ``count`` whitespace-separated header tokens, skipping comments."""
    out = []
    n = len(data)
    while len(out) < count:
        while pos < n and data[pos:pos + 1].isspace():
            pos += 1
        if pos < n and data[pos:pos + 1] == b"#":
            while pos < n and data[pos:pos + 1] not in (b"\n", b"\r"):
                pos += 1
            continue
        start = pos
        while pos < n and not data[pos:pos + 1].isspace() and data[pos:pos + 1] != b"#":
            pos += 1
        if start == pos:
            raise ImageFormatError("truncated header")
        out.append(data[start:pos])
    return out, pos


def decode_pgm(data: bytes) -> np.ndarray:
    magic = data[:2]
    if magic not in (b"P2", b"P5"):
        raise ImageFormatError(f"not a P2/P5 PGM file (magic {magic!r})")
    try:
        (w, h, maxval), pos = _tokens(data, 3, 2)
        w, h, maxval = int(w), int(h), int(maxval)
    except ValueError as exc:
        raise ImageFormatError(f"malformed header: {exc}") from None
    if w < 1 or h < 1:
        raise ImageFormatError(f"invalid dimensions {w}x{h}")
    if not 1 <= maxval <= 255:
        raise ImageFormatError(f"unsupported maxval {maxval}")
    if magic == b"P5":
        # exactly one whitespace byte separates header and raster
        pos += 1
        raster = data[pos:pos + w * h]
        if len(raster) < w * h:
            raise ImageFormatError(f"truncated raster: {len(raster)} of {w * h} bytes")
        pixels = np.frombuffer(raster, dtype=np.uint8)
    else:
        values = data[pos:].split()
        if len(values) < w * h:
            raise ImageFormatError(f"truncated raster: {len(values)} of {w * h} values")
        try:
            pixels = np.array([int(v) for v in values[:w * h]], dtype=np.int64)
        except ValueError:
            raise ImageFormatError("non-integer pixel value") from None
    if pixels.max(initial=0) > maxval or pixels.min(initial=0) < 0:
        raise ImageFormatError("pixel value outside [0, maxval]")
    return pixels.astype(np.uint8).reshape(h, w)


def load_image(path) -> np.ndarray:
    with open(path, "rb") as fh:
        return decode_pgm(fh.read())


def _as_uint8(image: np.ndarray) -> np.ndarray:
    arr = np.asarray(image)
    if arr.dtype != np.uint8:
        arr = np.clip(np.rint(arr), 0, 255).astype(np.uint8)
    return arr


def save_pgm(path, image: np.ndarray, binary: bool = True) -> None:
    arr = _as_uint8(image)
    if arr.ndim != 2:
        raise ValueError("PGM needs a 2-D grayscale image")
    h, w = arr.shape
    with open(path, "wb") as fh:
        if binary:
            fh.write(b"P5\n%d %d\n255\n" % (w, h))
            fh.write(np.ascontiguousarray(arr).tobytes())
        else:
            fh.write(b"P2\n%d %d\n255\n" % (w, h))
            for row in arr:
                fh.write(" ".join(str(int(v)) for v in row).encode() + b"\n")


def save_ppm(path, rgb: np.ndarray) -> None:
    arr = _as_uint8(rgb)
    if arr.ndim != 3 or arr.shape[2] != 3:
        raise ValueError("PPM needs an (h, w, 3) image")
    h, w, _ = arr.shape
    with open(path, "wb") as fh:
        fh.write(b"P6\n%d %d\n255\n" % (w, h))
        fh.write(np.ascontiguousarray(arr).tobytes())


def load_ppm(path) -> np.ndarray:
    with open(path, "rb") as fh:
        data = fh.read()
    if data[:2] != b"P6":
        raise ImageFormatError("not a P6 PPM file")
    (w, h, maxval), pos = _tokens(data, 3, 2)
    w, h = int(w), int(h)
    raster = data[pos + 1:pos + 1 + 3 * w * h]
    if len(raster) < 3 * w * h:
        raise ImageFormatError("truncated raster")
    return np.frombuffer(raster, dtype=np.uint8).reshape(h, w, 3)


def draw_landmarks(image: np.ndarray, shape: np.ndarray, radius: float = 2.0,
                   color=(255, 0, 0)) -> np.ndarray:
    """RGB copy of ``image`` with a filled disk at every landmark."""
    gray = _as_uint8(image)
    rgb = np.repeat(gray[:, :, None], 3, axis=2)
    h, w = gray.shape
    rows, cols = np.mgrid[0:h, 0:w]
    for x, y in np.asarray(shape, dtype=np.float64).reshape(-1, 2):
        mask = (cols - x) ** 2 + (rows - y) ** 2 <= radius ** 2
        rgb[mask] = color
    return rgb


def is_image_file(name: str) -> bool:
    return os.path.splitext(name)[1].lower() == ".pgm"
