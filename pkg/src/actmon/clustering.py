"""K-means with k-means++ seeding.

Deterministic for a fixed seed. Empty clusters are repaired by reseeding
the centroid with the point farthest from its current centroid, so a run
always ends with exactly k non-empty clusters when the data has at least
k distinct points.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import DimensionMismatch, InvalidParameter, TooFewDistinctPoints

MAX_ITER = 100
TOL = 1e-6


@dataclass(frozen=True)
class Clustering:
    centroids: np.ndarray  # (k, d)
    assignment: np.ndarray  # (n,) int cluster index per input row
    sse: float
    sse_history: tuple[float, ...]
    n_iter: int

    @property
    def k(self) -> int:
        return self.centroids.shape[0]

    def sizes(self) -> np.ndarray:
        return np.bincount(self.assignment, minlength=self.k)


def _sq_dists(vectors: np.ndarray, centroids: np.ndarray) -> np.ndarray:
    """(n, k) squared euclidean distances."""
    diff = vectors[:, None, :] - centroids[None, :, :]
    return (diff * diff).sum(axis=2)


def _seed_plus_plus(vectors: np.ndarray, k: int, rng: np.random.Generator) -> np.ndarray:
    n = vectors.shape[0]
    centroids = np.empty((k, vectors.shape[1]))
    centroids[0] = vectors[rng.integers(n)]
    closest = ((vectors - centroids[0]) ** 2).sum(axis=1)
    for i in range(1, k):
        total = closest.sum()
        if total <= 0.0:
            # all remaining mass sits on already-chosen points; pick any
            # distinct leftover uniformly
            leftovers = np.flatnonzero(closest == 0.0)
            centroids[i] = vectors[rng.choice(leftovers)]
        else:
            centroids[i] = vectors[rng.choice(n, p=closest / total)]
        closest = np.minimum(closest, ((vectors - centroids[i]) ** 2).sum(axis=1))
    return centroids


def kmeans(vectors: np.ndarray, k: int, seed: int = 0) -> Clustering:
    """Lloyd's algorithm; stops when no centroid moves more than 1e-6.

    Raises TooFewDistinctPoints when the data has fewer than k distinct
    rows, since k non-empty clusters would then be impossible.
    """
    vectors = np.asarray(vectors, dtype=np.float64)
    if vectors.ndim != 2:
        raise DimensionMismatch(f"expected (n, d) sample, got shape {vectors.shape}")
    if k < 1:
        raise InvalidParameter(f"k must be positive, got {k}")
    distinct = np.unique(vectors, axis=0).shape[0]
    if distinct < k:
        raise TooFewDistinctPoints(
            f"need at least {k} distinct points, have {distinct}"
        )

    rng = np.random.default_rng(seed)
    centroids = _seed_plus_plus(vectors, k, rng)
    history: list[float] = []
    assignment = np.zeros(vectors.shape[0], dtype=np.intp)
    n_iter = 0
    for n_iter in range(1, MAX_ITER + 1):
        dists = _sq_dists(vectors, centroids)
        assignment = dists.argmin(axis=1)
        history.append(float(dists[np.arange(len(assignment)), assignment].sum()))
        new_centroids = centroids.copy()
        for j in range(k):
            members = vectors[assignment == j]
            if len(members):
                new_centroids[j] = members.mean(axis=0)
            else:
                # reseed on the globally worst-fit point
                worst = dists[np.arange(len(assignment)), assignment].argmax()
                new_centroids[j] = vectors[worst]
                dists[worst, :] = 0.0  # keep a second empty cluster from reusing it
        shift = np.abs(new_centroids - centroids).max()
        centroids = new_centroids
        if shift < TOL:
            break

    dists = _sq_dists(vectors, centroids)
    assignment = dists.argmin(axis=1)
    sse = float(dists[np.arange(len(assignment)), assignment].sum())
    return Clustering(
        centroids=centroids,
        assignment=assignment,
        sse=sse,
        sse_history=tuple(history),
        n_iter=n_iter,
    )
