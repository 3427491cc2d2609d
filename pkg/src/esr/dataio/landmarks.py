"""Landmark text files and dataset directories.

Landmark file layout::

    version 1
    n_points N
    x1 y1
    ...
    xN yN
    box x y w h        (optional)

A dataset directory holds ``<stem>.pgm`` images next to ``<stem>.pts``
landmark files; entries are ordered by stem.
"""

from __future__ import annotations

import os
from dataclasses import dataclass

import numpy as np

from .images import load_image

LANDMARK_VERSION = 1
LANDMARK_EXT = ".pts"
IMAGE_EXT = ".pgm"


class LandmarkFormatError(ValueError):
    pass


@dataclass(frozen=True)
class DatasetEntry:
    image_path: str
    landmark_path: str
    box: tuple | None = None


def parse_landmarks(text: str):
    lines = [ln.strip() for ln in text.splitlines() if ln.strip()]
    if len(lines) < 2:
        raise LandmarkFormatError("missing header")
    head = lines[0].split()
    if head[:1] != ["version"] or len(head) != 2:
        raise LandmarkFormatError(f"bad version line {lines[0]!r}")
    if head[1] != str(LANDMARK_VERSION):
        raise LandmarkFormatError(f"unsupported landmark file version {head[1]}")
    count = lines[1].split()
    if count[:1] != ["n_points"] or len(count) != 2:
        raise LandmarkFormatError(f"bad n_points line {lines[1]!r}")
    try:
        n = int(count[1])
    except ValueError:
        raise LandmarkFormatError(f"bad point count {count[1]!r}") from None
    body = lines[2:]
    box = None
    if body and body[-1].startswith("box"):
        parts = body.pop().split()
        if len(parts) != 5:
            raise LandmarkFormatError("box line needs 4 numbers")
        try:
            box = tuple(float(v) for v in parts[1:])
        except ValueError:
            raise LandmarkFormatError("box values must be numbers") from None
    if len(body) != n:
        raise LandmarkFormatError(f"header declares {n} points, found {len(body)}")
    try:
        pts = np.array([[float(v) for v in ln.split()] for ln in body], dtype=np.float64)
    except ValueError:
        raise LandmarkFormatError("landmark coordinates must be numbers") from None
    if pts.shape != (n, 2):
        raise LandmarkFormatError("each point line needs exactly two numbers")
    if not np.all(np.isfinite(pts)):
        raise LandmarkFormatError("non-finite landmark coordinate")
    return pts, box


def load_landmarks(path):
    """Return ``(shape, box)``; ``box`` is ``None`` when the file has no box line."""
    with open(path) as fh:
        return parse_landmarks(fh.read())


def format_landmarks(shape, box=None) -> str:
    pts = np.asarray(shape, dtype=np.float64).reshape(-1, 2)
    lines = [f"version {LANDMARK_VERSION}", f"n_points {len(pts)}"]
    lines += [f"{x:.9g} {y:.9g}" for x, y in pts]
    if box is not None:
        lines.append("box " + " ".join(f"{v:.9g}" for v in box))
    return "\n".join(lines) + "\n"


def save_landmarks(path, shape, box=None) -> None:
    with open(path, "w") as fh:
        fh.write(format_landmarks(shape, box))


def list_dataset(directory) -> list[DatasetEntry]:
    stems = sorted(os.path.splitext(f)[0] for f in os.listdir(directory) if f.endswith(LANDMARK_EXT))
    entries = []
    for stem in stems:
        img = os.path.join(directory, stem + IMAGE_EXT)
        if not os.path.exists(img):
            raise FileNotFoundError(f"landmark file {stem}{LANDMARK_EXT} has no matching image")
        entries.append(DatasetEntry(img, os.path.join(directory, stem + LANDMARK_EXT)))
    if not entries:
        raise FileNotFoundError(f"no {LANDMARK_EXT} files in {directory}")
    return entries


@dataclass
class Dataset:
    images: list
    shapes: np.ndarray
    boxes: list
    entries: list

    def __len__(self):
        return len(self.images)


def load_dataset(directory) -> Dataset:
    """Load every image/landmark pair; all shapes must share a landmark count."""
    entries = list_dataset(directory)
    images, shapes, boxes = [], [], []
    for e in entries:
        images.append(load_image(e.image_path))
        s, box = load_landmarks(e.landmark_path)
        if shapes and s.shape != shapes[0].shape:
            raise LandmarkFormatError(
                f"{e.landmark_path}: {len(s)} points, dataset uses {len(shapes[0])}")
        shapes.append(s)
        boxes.append(box)
    entries = [DatasetEntry(e.image_path, e.landmark_path, b) for e, b in zip(entries, boxes)]
    return Dataset(images, np.stack(shapes), boxes, entries)
