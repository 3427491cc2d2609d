"""Correlation-based choice of pixel-difference features for a fern.

Every fern picks its ``F`` features out of ``P**2`` candidate differences. The
pixel-pixel covariance is computed once per stage; each selection round then
only needs the ``P`` covariances between a random projection of the targets
and the raw pixels, after which the correlation with every difference
``rho_m - rho_n`` follows from

    cov(y, rho_m - rho_n) = cov(y, rho_m) - cov(y, rho_n)
    var(rho_m - rho_n)    = cov(m, m) + cov(n, n) - 2 cov(m, n)

so a round costs ``O(NP + P**2)`` instead of ``O(NP**2)``.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

_REL_EPS = 1e-12


class SelectionError(RuntimeError):
    """No candidate feature has a defined correlation with the targets."""


@dataclass(frozen=True)
class CovarianceCache:
    pixel_cov: np.ndarray
    pixel_means: np.ndarray
    sample_count: int
    diff_var: np.ndarray = field(init=False, repr=False)

    def __post_init__(self):
        d = np.diag(self.pixel_cov)
        object.__setattr__(self, "diff_var", d[:, None] + d[None, :] - 2.0 * self.pixel_cov)

    @property
    def n_pixels(self) -> int:
        return self.pixel_cov.shape[0]

    def valid_pairs(self) -> np.ndarray:
        """Mask of differences whose variance is distinguishable from zero."""
        d = np.diag(self.pixel_cov)
        scale = d[:, None] + d[None, :]
        return self.diff_var > _REL_EPS * scale


@dataclass(frozen=True)
class ProjectedTarget:
    y_prob: np.ndarray
    variance: float


def precompute_pixel_covariance(rho: np.ndarray) -> CovarianceCache:
    """Sample covariance (``N - 1`` denominator) between all pixel columns."""
    rho = np.asarray(rho, dtype=np.float64)
    n = rho.shape[0]
    if n < 2:
        raise ValueError("pixel covariance needs at least 2 samples")
    means = rho.mean(axis=0)
    centered = rho - means
    cov = centered.T @ centered / (n - 1)
    cov = 0.5 * (cov + cov.T)
    return CovarianceCache(cov, means, n)


def project_targets(y: np.ndarray, rng: np.random.Generator) -> ProjectedTarget:
    """Project each row of the targets onto one unit-Gaussian direction."""
    flat = np.asarray(y, dtype=np.float64).reshape(len(y), -1)
    if flat.shape[0] < 2:
        raise ValueError("projection needs at least 2 samples")
    v = rng.standard_normal(flat.shape[1])
    y_prob = flat @ v
    return ProjectedTarget(y_prob, float(np.var(y_prob, ddof=1)))


def target_pixel_covariance(proj: ProjectedTarget, rho: np.ndarray) -> np.ndarray:
    """``cov(y_prob, rho_j)`` for every pixel ``j``; one pass over ``rho``.

    Centering ``y_prob`` alone suffices, which keeps ``rho`` read exactly once.
    """
    yc = proj.y_prob - proj.y_prob.mean()
    return (rho.T @ yc) / (len(yc) - 1)


def correlation_matrix(proj: ProjectedTarget, cache: CovarianceCache, target_cov: np.ndarray) -> np.ndarray:
    """Pearson correlation of ``y_prob`` with every ``rho_m - rho_n``.

    Invalid candidates (zero-variance difference or projection) are NaN.
    """
    num = target_cov[:, None] - target_cov[None, :]
    valid = cache.valid_pairs()
    if not proj.variance > 0.0:
        valid = np.zeros_like(valid)
    with np.errstate(invalid="ignore", divide="ignore"):
        corr = num / np.sqrt(proj.variance * cache.diff_var)
    corr[~valid] = np.nan
    return corr


def correlation_with_difference(proj: ProjectedTarget, cache: CovarianceCache, target_cov: np.ndarray,
                                m: int, n: int) -> float:
    """Correlation of ``y_prob`` with ``rho_m - rho_n``; NaN marks an invalid candidate."""
    p = cache.n_pixels
    if not (0 <= m < p and 0 <= n < p):
        raise IndexError(f"pixel index out of range for {p} pixels")
    dv = cache.diff_var[m, n]
    d = cache.pixel_cov[m, m] + cache.pixel_cov[n, n]
    if m == n or not dv > _REL_EPS * d or not proj.variance > 0.0:
        return float("nan")
    return float((target_cov[m] - target_cov[n]) / np.sqrt(proj.variance * dv))


def best_pair(corr: np.ndarray) -> tuple[int, int]:
    """Arg-max of a correlation matrix, NaNs skipped, ties to the smallest ``(m, n)``."""
    scores = np.where(np.isnan(corr), -np.inf, corr)
    flat = int(np.argmax(scores))
    if scores.flat[flat] == -np.inf:
        raise SelectionError("every candidate pixel difference is invalid")
    m, n = divmod(flat, corr.shape[1])
    return m, n


def select_features(y: np.ndarray, rho: np.ndarray, cache: CovarianceCache, f: int,
                    rng: np.random.Generator) -> np.ndarray:
    """Choose ``f`` pixel pairs, one fresh random projection per pair.

    Each round keeps the pair with the largest signed correlation; the same
    pair may come up in several rounds.

    Returns
    -------
    ndarray of int, shape (f, 2)

    Raises
    ------
    SelectionError
        If no pair has a defined correlation, e.g. all-zero targets.
    """
    if f < 1:
        raise ValueError("f must be >= 1")
    if cache.n_pixels < 2:
        raise ValueError("selection needs at least 2 pixels")
    pairs = np.empty((f, 2), dtype=np.intp)
    for k in range(f):
        proj = project_targets(y, rng)
        corr = correlation_matrix(proj, cache, target_pixel_covariance(proj, rho))
        pairs[k] = best_pair(corr)
    return pairs
