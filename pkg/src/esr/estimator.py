"""scikit-learn style front end for cascaded shape regression."""

from __future__ import annotations

import numpy as np
from sklearn.base import BaseEstimator
from sklearn.utils.validation import check_is_fitted

from .cascade import TestParams, TrainingTrace, TrainParams, predict, train
from .dataio.metrics import alignment_error
from .validation import check_boxes, check_images, check_seed, check_shapes


class ShapeRegressor(BaseEstimator):
    """Explicit shape regression with boosted random ferns.

    ``fit`` takes grayscale images and their landmark shapes; ``predict``
    returns one ``(n_fp, 2)`` shape per image.

    Parameters
    ----------
    n_aug : int, default=20
        Initial shapes drawn per training image.
    n_stages : int, default=10
        Cascade stages ``T``.
    n_ferns : int, default=500
        Ferns boosted per stage ``K``.
    n_pixels : int, default=400
        Shape-indexed pixels sampled per stage ``P``.
    n_features : int, default=5
        Pixel-difference tests per fern ``F``.
    kappa : float, default=0.3
        Half-width of the local-offset square, in mean-shape units.
    beta : float, default=1000.0
        Bin-output shrinkage.
    n_init : int, default=5
        Initial shapes per test image; results are combined by median.
    normalizer_pair : tuple of int or None, default=(0, 1)
        Landmarks whose distance normalizes errors in ``score``.
    random_state : int, numpy Generator or None, default=0

    Attributes
    ----------
    model_ : ESRModel
    mean_shape_ : ndarray of shape (n_fp, 2)
    n_fp_ : int
    train_errors_ : list of float
        Mean training alignment error after initialization and each stage.
    """

    def __init__(self, n_aug=20, n_stages=10, n_ferns=500, n_pixels=400, n_features=5,
                 kappa=0.3, beta=1000.0, n_init=5, normalizer_pair=(0, 1), random_state=0):
        self.n_aug = n_aug
        self.n_stages = n_stages
        self.n_ferns = n_ferns
        self.n_pixels = n_pixels
        self.n_features = n_features
        self.kappa = kappa
        self.beta = beta
        self.n_init = n_init
        self.normalizer_pair = normalizer_pair
        self.random_state = random_state

    def _train_params(self, seed):
        return TrainParams(n_aug=self.n_aug, t_stages=self.n_stages, k_ferns=self.n_ferns,
                           p_pixels=self.n_pixels, f_features=self.n_features,
                           kappa=self.kappa, beta=self.beta, seed=seed)

    def fit(self, X, y, boxes=None, init_set=None):
        images = check_images(X)
        shapes = check_shapes(y, len(images))
        boxes = check_boxes(boxes, len(images))
        if init_set is not None:
            init_set = check_shapes(init_set, n_fp=shapes.shape[1])
        TestParams(self.n_init)
        seed = check_seed(self.random_state)
        trace = TrainingTrace()
        self.model_ = train(images, shapes, self._train_params(seed), init_set=init_set,
                            boxes=boxes, trace=trace)
        self.mean_shape_ = self.model_.mean_shape
        self.n_fp_ = self.model_.n_fp
        self.train_errors_ = trace.stage_errors
        self._predict_seed = seed
        return self

    def predict(self, X, boxes=None):
        check_is_fitted(self, "model_")
        images = check_images(X)
        boxes = check_boxes(boxes, len(images))
        return predict(self.model_, images, TestParams(self.n_init), rng=self._predict_seed, boxes=boxes)

    def score(self, X, y, boxes=None):
        """Negative mean normalized alignment error (higher is better)."""
        pred = self.predict(X, boxes)
        truth = check_shapes(y, len(pred), self.n_fp_)
        return -float(np.mean(alignment_error(pred, truth, self.normalizer_pair)))

    @classmethod
    def from_model(cls, model, n_init=5, random_state=0):
        """Wrap an already trained (e.g. loaded) model."""
        p = model.params
        est = cls(n_aug=p.n_aug, n_stages=p.t_stages, n_ferns=p.k_ferns, n_pixels=p.p_pixels,
                  n_features=p.f_features, kappa=p.kappa, beta=p.beta, n_init=n_init,
                  random_state=random_state)
        est.model_ = model
        est.mean_shape_ = model.mean_shape
        est.n_fp_ = model.n_fp
        est.train_errors_ = []
        est._predict_seed = check_seed(random_state)
        return est
