import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from machopt.ipm import IPM_BOUNDS
from machopt.problem import BoundsSpec, on_grid
from machopt.sampling import PrecisionConflict, constrained_sampling, lhs


def test_four_bins_one_each():
    b = BoundsSpec([0.0], [1.0])
    x = lhs(4, b, 0)[:, 0]
    bins = np.minimum((x / 0.25).astype(int), 3)
    assert sorted(bins) == [0, 1, 2, 3]


@given(n=st.integers(1, 40), seed=st.integers(0, 10_000))
def test_strict_stratification(n, seed):
    b = BoundsSpec([0.0, -1.0, 10.0], [1.0, 1.0, 13.7])
    x = lhs(n, b, seed)
    assert on_grid(x)
    for d in range(3):
        width = b.span[d] / n
        k = np.floor((x[:, d] - b.lower[d]) / width + 1e-9).astype(int)
        k = np.minimum(k, n - 1)
        assert sorted(k) == list(range(n))
        assert np.all((x[:, d] >= b.lower[d]) & (x[:, d] <= b.upper[d]))


def test_deterministic():
    a = lhs(30, IPM_BOUNDS, 9, strict_strata=False)
    b = lhs(30, IPM_BOUNDS, 9, strict_strata=False)
    assert a.tobytes() == b.tobytes()
    assert not np.array_equal(a, lhs(30, IPM_BOUNDS, 10, strict_strata=False))


def test_precision_conflict():
    with pytest.raises(PrecisionConflict, match="variable 9"):
        lhs(100, IPM_BOUNDS, 0)
    x = lhs(100, IPM_BOUNDS, 0, strict_strata=False)
    assert x.shape == (100, 10) and on_grid(x) and np.all([IPM_BOUNDS.contains(r) for r in x])


def test_nonpositive_n():
    with pytest.raises(ValueError):
        lhs(0, IPM_BOUNDS, 0)


def test_constrained_sampling_outputs(ipm):
    X = constrained_sampling(60, ipm, 4)
    assert X.shape == (60, 10)
    assert on_grid(X)
    assert all(ipm.is_feasible(x) for x in X)
    assert len({tuple(np.round(x * 100).astype(int)) for x in X}) == 60
    assert X.tobytes() == constrained_sampling(60, ipm, 4).tobytes()


def test_constrained_sampling_unconstrained():
    from machopt.problem import Problem

    p = Problem("box", BoundsSpec([0, 0], [1, 1]), lambda x: x, None, (False, False))
    X = constrained_sampling(1, p, 0)
    assert X.shape == (1, 2) and on_grid(X)
