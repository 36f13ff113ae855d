import numpy as np
import pytest

from machopt.kmeans import kmeans


def test_separated_blobs():
    rng = np.random.default_rng(0)
    X = np.vstack([rng.normal(c, 0.05, (20, 2)) for c in ([0, 0], [5, 5], [0, 5])])
    labels, centers = kmeans(X, 3, np.random.default_rng(1))
    groups = [set(labels[i * 20:(i + 1) * 20]) for i in range(3)]
    assert all(len(g) == 1 for g in groups) and len(set.union(*groups)) == 3
    assert centers.shape == (3, 2)


def test_k_capped_and_coincident_points():
    X = np.ones((4, 2))
    labels, centers = kmeans(X, 10, np.random.default_rng(0))
    assert centers.shape == (4, 2) and labels.shape == (4,)


def test_deterministic_for_seed():
    X = np.random.default_rng(3).random((50, 3))
    a = kmeans(X, 5, np.random.default_rng(9))
    b = kmeans(X, 5, np.random.default_rng(9))
    assert np.array_equal(a[0], b[0]) and np.array_equal(a[1], b[1])


def test_invalid():
    with pytest.raises(ValueError):
        kmeans(np.zeros((0, 2)), 2, np.random.default_rng(0))
    with pytest.raises(ValueError):
        kmeans(np.zeros((3, 2)), 0, np.random.default_rng(0))


def _inertia(X, labels, centers):
    return float(np.sum((X - centers[labels]) ** 2))


def test_restarts_never_worse_than_first_start():
    X = np.linspace(0, 1, 20)[:, None]
    better = 0
    for seed in range(200):
        one = _inertia(X, *kmeans(X, 2, np.random.default_rng(seed), n_init=1))
        many = _inertia(X, *kmeans(X, 2, np.random.default_rng(seed), n_init=10))
        assert many <= one
        better += many < one
    assert better > 0
