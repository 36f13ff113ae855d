"""Seeded k-means with k-means++ initialization (Lloyd iterations)."""

from __future__ import annotations

import numpy as np


def _lloyd(X: np.ndarray, k: int, rng: np.random.Generator, max_iter: int):
    n = X.shape[0]
    centers = np.empty((k, X.shape[1]))
    centers[0] = X[rng.integers(n)]
    d2 = np.sum((X - centers[0]) ** 2, axis=1)
    for c in range(1, k):
        total = d2.sum()
        # All remaining points coincide with chosen centers: pick uniformly.
        idx = rng.integers(n) if total <= 0.0 else int(rng.choice(n, p=d2 / total))
        centers[c] = X[idx]
        d2 = np.minimum(d2, np.sum((X - centers[c]) ** 2, axis=1))
    labels = np.full(n, -1)
    for _ in range(max_iter):
        dist = np.sum((X[:, None, :] - centers[None, :, :]) ** 2, axis=2)
        new = np.argmin(dist, axis=1)
        if np.array_equal(new, labels):
            break
        labels = new
        for c in range(k):
            members = X[labels == c]
            if len(members):
                centers[c] = members.mean(axis=0)
    inertia = float(np.sum((X - centers[labels]) ** 2))
    return labels, centers, inertia


def kmeans(
    X, k: int, rng: np.random.Generator, max_iter: int = 100, n_init: int = 10
) -> tuple[np.ndarray, np.ndarray]:
    """Cluster rows of ``X`` into at most ``k`` groups.

    Runs ``n_init`` seeded k-means++ starts and keeps the one with the
    lowest within-cluster sum of squares (earliest start on ties); a single
    Lloyd run often settles in an unbalanced local optimum.

    Returns:
        ``(labels, centers)``. Clusters that end up empty keep their last
        center and simply own no points.
    """
    X = np.asarray(X, dtype=float)
    n = X.shape[0]
    if n == 0 or k < 1 or n_init < 1:
        raise ValueError("need at least one point, one cluster and one start")
    k = min(k, n)
    best = None
    for _ in range(n_init):
        labels, centers, inertia = _lloyd(X, k, rng, max_iter)
        if best is None or inertia < best[2]:
            best = (labels, centers, inertia)
    return best[0], best[1]
