"""Seeded, deterministic k-means for intention point extraction.

Lloyd's algorithm with k-means++ initialization and multiple restarts; the
best-SSE run wins and its centroids are returned sorted lexicographically
(x, then y), so the same vocabulary and seed always reproduce the same
intention points bit for bit.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

DEFAULT_RESTARTS = 10


@dataclass(frozen=True)
class IntentionPointSet:
    """Per-command endpoint centroids: (3 commands, K, 2) meters, ego frame."""

    points: np.ndarray

    def __post_init__(self):
        pts = np.asarray(self.points, dtype=np.float64)
        if pts.ndim != 3 or pts.shape[0] != 3 or pts.shape[2] != 2:
            raise ValueError(f"intention points must be (3, K, 2), got {pts.shape}")
        object.__setattr__(self, "points", pts)

    @property
    def k(self) -> int:
        return self.points.shape[1]

    def for_command(self, command: int) -> np.ndarray:
        return self.points[command]


def _squared_distances(points: np.ndarray, centroids: np.ndarray) -> np.ndarray:
    diff = points[:, None, :] - centroids[None, :, :]
    return np.einsum("nkd,nkd->nk", diff, diff)


def _kmeans_pp_init(points: np.ndarray, k: int, rng: np.random.Generator) -> np.ndarray:
    n = points.shape[0]
    centroids = np.empty((k, points.shape[1]))
    centroids[0] = points[rng.integers(n)]
    d2 = np.sum((points - centroids[0]) ** 2, axis=1)
    for i in range(1, k):
        total = d2.sum()
        if total <= 0.0:  # all remaining points coincide with a centroid
            centroids[i] = points[rng.integers(n)]
            continue
        target = rng.random() * total
        idx = int(np.searchsorted(np.cumsum(d2), target))
        idx = min(idx, n - 1)
        centroids[i] = points[idx]
        d2 = np.minimum(d2, np.sum((points - centroids[i]) ** 2, axis=1))
    return centroids


def _lloyd(points: np.ndarray, centroids: np.ndarray, max_iters: int):
    assign = np.full(points.shape[0], -1, dtype=np.int64)
    for _ in range(max_iters):
        d2 = _squared_distances(points, centroids)
        new_assign = d2.argmin(axis=1)
        # empty cluster: re-seed it at the point farthest from its centroid
        for c in range(centroids.shape[0]):
            if not np.any(new_assign == c):
                far = int(d2[np.arange(len(points)), new_assign].argmax())
                centroids[c] = points[far]
                new_assign[far] = c
        if np.array_equal(new_assign, assign):
            break
        assign = new_assign
        for c in range(centroids.shape[0]):
            centroids[c] = points[assign == c].mean(axis=0)
    sse = float(_squared_distances(points, centroids)[np.arange(len(points)), assign].sum())
    return centroids, assign, sse


def kmeans(
    points,
    k: int,
    seed,
    max_iters: int = 100,
    restarts: int = DEFAULT_RESTARTS,
) -> np.ndarray:
    """Cluster 2-D points; returns (k, 2) centroids sorted lexicographically.

    ``seed`` may be an int or a sequence accepted by ``default_rng``; restart
    r draws from ``default_rng([*seed, r])`` so runs are reproducible.
    """
    points = np.asarray(points, dtype=np.float64)
    if points.ndim != 2:
        raise ValueError(f"points must be (n, d), got {points.shape}")
    n = points.shape[0]
    if n < k:
        raise ValueError(f"need at least {k} points to form {k} clusters, got {n}")
    seed_seq = [seed] if np.isscalar(seed) else list(seed)

    best = None
    best_sse = np.inf
    for r in range(restarts):
        rng = np.random.default_rng(seed_seq + [r])
        centroids = _kmeans_pp_init(points, k, rng)
        centroids, _, sse = _lloyd(points, centroids.copy(), max_iters)
        if sse < best_sse - 1e-12:
            best_sse = sse
            best = centroids
    order = np.lexsort((best[:, 1], best[:, 0]))
    return best[order]


def kmeans_sse(points, centroids) -> float:
    """Sum of squared distances of each point to its nearest centroid."""
    points = np.asarray(points, dtype=np.float64)
    centroids = np.asarray(centroids, dtype=np.float64)
    return float(_squared_distances(points, centroids).min(axis=1).sum())
