"""Gaussian fits and distances used by the monitors.

Fits are maximum-likelihood (divide by n, not n-1). Interval bounds come
from the empirical rule: mean plus or minus kappa standard deviations. The
multivariate fit regularizes the covariance with a small ridge so that a
Cholesky factorization always exists for non-degenerate data.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.linalg import cholesky, solve_triangular

from .errors import DimensionMismatch, NotPositiveDefinite, TooFewSamples


@dataclass(frozen=True)
class GaussianFit:
    mean: np.ndarray  # (d,)
    std: np.ndarray  # (d,) ML estimate


@dataclass(frozen=True)
class MultivariateFit:
    mean: np.ndarray  # (d,)
    chol: np.ndarray  # (d, d) lower-triangular factor of cov + ridge*I


def fit_gaussian(vectors: np.ndarray) -> GaussianFit:
    """Per-dimension ML mean and standard deviation of an (n, d) sample."""
    vectors = np.asarray(vectors, dtype=np.float64)
    if vectors.ndim != 2:
        raise DimensionMismatch(f"expected (n, d) sample, got shape {vectors.shape}")
    if vectors.shape[0] < 1:
        raise TooFewSamples("need at least one vector to fit a Gaussian")
    return GaussianFit(mean=vectors.mean(axis=0), std=vectors.std(axis=0))


def interval_bounds(fit: GaussianFit, kappa: float) -> tuple[np.ndarray, np.ndarray]:
    """Empirical-rule interval [mean - kappa*std, mean + kappa*std] per dim."""
    return fit.mean - kappa * fit.std, fit.mean + kappa * fit.std


def fit_multivariate(vectors: np.ndarray, ridge: float = 1e-6) -> MultivariateFit:
    """ML multivariate Gaussian with ridge-regularized covariance.

    A single vector yields covariance ridge*I, so every non-empty sample
    produces a usable fit.
    """
    vectors = np.asarray(vectors, dtype=np.float64)
    if vectors.ndim != 2:
        raise DimensionMismatch(f"expected (n, d) sample, got shape {vectors.shape}")
    n, d = vectors.shape
    if n < 1:
        raise TooFewSamples("need at least one vector to fit a Gaussian")
    mean = vectors.mean(axis=0)
    centered = vectors - mean
    cov = (centered.T @ centered) / n + ridge * np.eye(d)
    try:
        chol = cholesky(cov, lower=True)
    except np.linalg.LinAlgError as err:
        raise NotPositiveDefinite(
            f"covariance not positive definite even with ridge {ridge}"
        ) from err
    # C order, so distances are bit-identical after a JSON round trip
    # (BLAS picks layout-dependent kernels)
    return MultivariateFit(mean=mean, chol=np.ascontiguousarray(chol))


def mahalanobis(fit: MultivariateFit, x: np.ndarray) -> float:
    """Mahalanobis distance of one vector under the fitted Gaussian."""
    x = np.asarray(x, dtype=np.float64)
    if x.shape != fit.mean.shape:
        raise DimensionMismatch(
            f"vector shape {x.shape} does not match fit dim {fit.mean.shape}"
        )
    y = solve_triangular(fit.chol, x - fit.mean, lower=True)
    return float(np.sqrt(y @ y))


def mahalanobis_batch(fit: MultivariateFit, xs: np.ndarray) -> np.ndarray:
    """Mahalanobis distances for an (n, d) batch."""
    xs = np.asarray(xs, dtype=np.float64)
    if xs.ndim != 2 or xs.shape[1] != fit.mean.shape[0]:
        raise DimensionMismatch(
            f"batch shape {xs.shape} does not match fit dim {fit.mean.shape}"
        )
    ys = solve_triangular(fit.chol, (xs - fit.mean).T, lower=True)
    return np.sqrt((ys * ys).sum(axis=0))
