"""Two-level boosted shape regression.

The outer level is a cascade of ``T`` stage regressors, each re-indexing
pixels against the current shape estimate. Inside a stage ``K`` ferns are
boosted on the residual of the normalized targets.
"""

from __future__ import annotations

import logging
from dataclasses import asdict, dataclass, field
from typing import Callable, Sequence

import numpy as np

from .features import (
    LocalCoordinates,
    extract_shape_indexed_pixels,
    generate_local_coordinates,
    pixel_difference_features,
)
from .fern import MAX_FEATURES, Fern, compute_bin_outputs, sample_thresholds
from .geometry import (
    DegenerateShapeError,
    align_linear_batch,
    bounding_box,
    compute_mean_shape,
    inverse_linear,
    normalize_targets_batch,
    place_in_box,
    rotate_scale,
)
from .selection import SelectionError, precompute_pixel_covariance, select_features

logger = logging.getLogger(__name__)

FORMAT_VERSION = 1

# targets live in the unit-RMS mean-shape frame; below this nothing is left to fit
ZERO_RESIDUAL = 1e-12


@dataclass(frozen=True)
class TrainParams:
    n_aug: int = 20
    t_stages: int = 10
    k_ferns: int = 500
    p_pixels: int = 400
    f_features: int = 5
    kappa: float = 0.3
    beta: float = 1000.0
    seed: int = 0

    def __post_init__(self):
        for name in ("n_aug", "k_ferns", "p_pixels", "f_features"):
            if int(getattr(self, name)) < 1:
                raise ValueError(f"{name} must be >= 1")
        if self.t_stages < 0:
            raise ValueError("t_stages must be >= 0")
        if self.f_features > MAX_FEATURES:
            raise ValueError(f"f_features must be <= {MAX_FEATURES}")
        if self.p_pixels < 2:
            raise ValueError("p_pixels must be >= 2 to form a pixel difference")
        if not self.kappa > 0:
            raise ValueError("kappa must be > 0")
        if self.beta < 0:
            raise ValueError("beta must be >= 0")


@dataclass(frozen=True)
class TestParams:
    n_init: int = 5

    __test__ = False

    def __post_init__(self):
        if self.n_init < 1:
            raise ValueError("n_init must be >= 1")


@dataclass(frozen=True)
class StageRegressor:
    coords: LocalCoordinates
    ferns: tuple[Fern, ...]


@dataclass
class ESRModel:
    mean_shape: np.ndarray
    stages: list[StageRegressor]
    n_fp: int
    params: TrainParams
    init_set: np.ndarray
    format_version: int = FORMAT_VERSION

    @property
    def n_ferns(self) -> int:
        return sum(len(s.ferns) for s in self.stages)


@dataclass
class Initialization:
    """Augmented samples: ``images[image_index[i]]`` with ``initial[i]``."""

    image_index: np.ndarray
    initial: np.ndarray
    ground_truth: np.ndarray | None = None


@dataclass
class TrainingTrace:
    """What ``train`` observed, for monitoring and tests."""

    stage_errors: list[float] = field(default_factory=list)
    residual_sse: list[list[float]] = field(default_factory=list)
    stage_shapes: list[np.ndarray] = field(default_factory=list)
    initialization: Initialization | None = None


def sample_box(image: np.ndarray, shape: np.ndarray | None = None, box=None):
    """Placement box: given box, else the shape's bounding box, else the whole image."""
    if box is not None:
        return tuple(float(v) for v in box)
    if shape is not None:
        return bounding_box(shape)
    h, w = np.asarray(image).shape
    return (0.0, 0.0, float(w - 1), float(h - 1))


def initialize(images: Sequence[np.ndarray], d: int, init_set: np.ndarray, rng: np.random.Generator,
               shapes: np.ndarray | None = None, boxes=None) -> Initialization:
    """Replicate every sample ``d`` times, each with an exemplar placed in its box.

    Exemplars are drawn without replacement when ``init_set`` has at least
    ``d`` shapes, with replacement otherwise.
    """
    if d < 1:
        raise ValueError("d must be >= 1")
    init_set = np.asarray(init_set, dtype=np.float64)
    if init_set.ndim != 3 or len(init_set) == 0:
        raise ValueError("init_set must be a non-empty stack of shapes")
    n = len(images)
    replace = len(init_set) < d
    initial = np.empty((n * d,) + init_set.shape[1:])
    for c in range(n):
        box = sample_box(images[c], None if shapes is None else shapes[c],
                         None if boxes is None else boxes[c])
        picks = rng.choice(len(init_set), size=d, replace=replace)
        for j, e in enumerate(picks):
            initial[c * d + j] = place_in_box(init_set[e], box)
    image_index = np.repeat(np.arange(n), d)
    gt = None if shapes is None else np.repeat(np.asarray(shapes, dtype=np.float64), d, axis=0)
    return Initialization(image_index, initial, gt)


def stage_increments(rho: np.ndarray, ferns: Sequence[Fern], n_fp: int) -> np.ndarray:
    """Summed fern outputs for each row of ``rho``, in fern order."""
    delta = np.zeros((rho.shape[0], n_fp, 2))
    for fern in ferns:
        delta += fern.predict(pixel_difference_features(rho, fern.pairs))
    return delta


def update_shapes(shapes: np.ndarray, delta: np.ndarray, mean: np.ndarray) -> np.ndarray:
    """Map normalized increments back to each shape's frame and add them."""
    a, b = align_linear_batch(shapes, mean)
    ia, ib = inverse_linear(a, b)
    return shapes + rotate_scale(ia[:, None], ib[:, None], delta)


def _fit_stage(targets, images, shapes, image_index, mean, params: TrainParams, rng):
    n_fp = mean.shape[0]
    coords = generate_local_coordinates(n_fp, params.p_pixels, params.kappa, rng)
    rho = extract_shape_indexed_pixels(images, shapes, coords, mean, image_index)
    residual = np.array(targets, dtype=np.float64, copy=True)
    sse = [float(np.sum(residual ** 2))]
    ferns = []
    if np.max(np.abs(residual), initial=0.0) <= ZERO_RESIDUAL:
        return StageRegressor(coords, ()), rho, sse
    cache = precompute_pixel_covariance(rho)
    n_bins = 2 ** params.f_features
    for _ in range(params.k_ferns):
        try:
            pairs = select_features(residual, rho, cache, params.f_features, rng)
        except SelectionError:
            if np.max(np.abs(residual)) <= ZERO_RESIDUAL:
                break
            raise
        feats = pixel_difference_features(rho, pairs)
        thresholds = sample_thresholds(float(np.max(np.abs(feats))), params.f_features, rng)
        weights = 1 << np.arange(params.f_features)
        bins = (feats >= thresholds).astype(np.int64) @ weights
        outputs = compute_bin_outputs(residual, bins, n_bins, params.beta)
        fern = Fern(pairs, thresholds, outputs)
        residual -= outputs[bins]
        sse.append(float(np.sum(residual ** 2)))
        ferns.append(fern)
    return StageRegressor(coords, tuple(ferns)), rho, sse


def learn_stage_regressor(targets: np.ndarray, images, shapes: np.ndarray, mean: np.ndarray,
                          params: TrainParams, rng: np.random.Generator, image_index=None) -> StageRegressor:
    """Boost ``K`` ferns on ``targets`` using pixels indexed by ``shapes``.

    Targets that are zero (to within ``ZERO_RESIDUAL``) give a stage without ferns.
    """
    stage, _, _ = _fit_stage(targets, images, shapes, image_index, mean, params, rng)
    return stage


def apply_stage_regressor(image: np.ndarray, shape: np.ndarray, stage: StageRegressor,
                          mean: np.ndarray) -> np.ndarray:
    """Normalized-frame increment the stage proposes for one image."""
    shape = np.asarray(shape, dtype=np.float64)
    rho = extract_shape_indexed_pixels([image], shape[None], stage.coords, mean)
    return stage_increments(rho, stage.ferns, mean.shape[0])[0]


def run_cascade(stages: Sequence[StageRegressor], images, shapes: np.ndarray, mean: np.ndarray,
                image_index=None) -> np.ndarray:
    """Push a stack of shapes through every stage."""
    shapes = np.asarray(shapes, dtype=np.float64)
    for stage in stages:
        rho = extract_shape_indexed_pixels(images, shapes, stage.coords, mean, image_index)
        shapes = update_shapes(shapes, stage_increments(rho, stage.ferns, mean.shape[0]), mean)
    return shapes


def alignment_errors(pred: np.ndarray, truth: np.ndarray) -> np.ndarray:
    """Per-sample ``||S - S_hat||_2 / n_fp``."""
    diff = (np.asarray(pred) - np.asarray(truth)).reshape(len(pred), -1)
    return np.linalg.norm(diff, axis=1) / np.asarray(truth).shape[1]


def train(images: Sequence[np.ndarray], shapes, params: TrainParams = TrainParams(),
          init_set=None, boxes=None, trace: TrainingTrace | None = None,
          on_stage: Callable[[int, float], None] | None = None) -> ESRModel:
    """Fit a cascade on labeled images.

    Parameters
    ----------
    images : sequence of 2-D arrays
    shapes : array-like, shape (n, n_fp, 2)
        Ground-truth landmarks.
    params : TrainParams
    init_set : array-like, shape (m, n_fp, 2), optional
        Initialization exemplars; the training shapes when omitted.
    boxes : sequence of (x, y, w, h) or None, optional
        Where to place exemplars; a sample's own bounding box when absent.
    trace : TrainingTrace, optional
        Filled with per-stage errors, per-fern residual SSE and shapes.
    on_stage : callable, optional
        Called as ``on_stage(t, mean_error)`` after initialization (``t=0``)
        and after every stage.
    """
    shapes = np.asarray(shapes, dtype=np.float64)
    if shapes.ndim != 3 or shapes.shape[2] != 2:
        raise ValueError("shapes must be (n, n_fp, 2)")
    if len(shapes) < 2:
        raise ValueError("training needs at least 2 labeled samples")
    if len(images) != len(shapes):
        raise ValueError(f"{len(images)} images for {len(shapes)} shapes")
    init_set = shapes if init_set is None else np.asarray(init_set, dtype=np.float64)
    rng = np.random.default_rng(params.seed)
    mean = compute_mean_shape(shapes)

    init = initialize(images, params.n_aug, init_set, rng, shapes=shapes, boxes=boxes)
    current = init.initial
    if trace is not None:
        trace.initialization = init
        trace.stage_shapes.append(current)

    def report(t):
        err = float(np.mean(alignment_errors(current, init.ground_truth)))
        logger.info("stage=%d train_error=%.6g", t, err)
        if trace is not None:
            trace.stage_errors.append(err)
        if on_stage is not None:
            on_stage(t, err)

    report(0)
    stages = []
    for t in range(1, params.t_stages + 1):
        targets = normalize_targets_batch(init.ground_truth, current, mean)
        stage, rho, sse = _fit_stage(targets, images, current, init.image_index, mean, params, rng)
        current = update_shapes(current, stage_increments(rho, stage.ferns, mean.shape[0]), mean)
        stages.append(stage)
        if trace is not None:
            trace.residual_sse.append(sse)
            trace.stage_shapes.append(current)
        report(t)
    return ESRModel(mean, stages, mean.shape[0], params, init_set.copy())


def combine_multiple_results(shapes) -> np.ndarray:
    """Per-coordinate lower median of a stack of shapes."""
    stack = np.asarray(shapes, dtype=np.float64)
    if stack.ndim != 3 or len(stack) == 0:
        raise ValueError("need a non-empty (n, n_fp, 2) stack")
    return np.sort(stack, axis=0)[(len(stack) - 1) // 2]


def predict(model: ESRModel, images: Sequence[np.ndarray], test_params: TestParams = TestParams(),
            init_set=None, rng: np.random.Generator | int | None = 0, boxes=None) -> np.ndarray:
    """Shapes for ``images``, each the median of ``n_init`` cascade runs.

    Returns
    -------
    ndarray, shape (n_images, n_fp, 2)
    """
    rng = np.random.default_rng(rng)
    init_set = model.init_set if init_set is None else np.asarray(init_set, dtype=np.float64)
    if init_set.shape[1] != model.n_fp:
        raise DegenerateShapeError("init_set does not match the model's landmark count")
    d = test_params.n_init
    init = initialize(images, d, init_set, rng, boxes=boxes)
    final = run_cascade(model.stages, images, init.initial, model.mean_shape, init.image_index)
    return np.stack([combine_multiple_results(final[i * d:(i + 1) * d]) for i in range(len(images))])


def predict_one(model: ESRModel, image: np.ndarray, test_params: TestParams = TestParams(),
                init_set=None, rng=0, box=None) -> np.ndarray:
    return predict(model, [image], test_params, init_set, rng, None if box is None else [box])[0]


def mean_shape_baseline(model: ESRModel, images, boxes=None) -> np.ndarray:
    """Mean shape placed in each image's box, no regression."""
    return np.stack([
        place_in_box(model.mean_shape, sample_box(img, None, None if boxes is None else boxes[i]))
        for i, img in enumerate(images)
    ])


def params_dict(params: TrainParams) -> dict:
    return asdict(params)
