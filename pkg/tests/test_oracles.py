import numpy as np
import pytest

from machopt.ipm import X_REF
from machopt.oracles import brute_sort, corner_search, direct_geometry, hand_tradeoff, mc_hypervolume


def test_direct_geometry_reference():
    values, g = direct_geometry(X_REF)
    assert values["IM_OD"] == pytest.approx(160.4) and max(g) <= 0


def test_brute_sort():
    assert brute_sort([[0, 1], [1, 0], [1, 1]], [0, 0, 0]) == [[0, 1], [2]]
    assert brute_sort([[0, 0], [5, 5]], [1.0, 0.0]) == [[1], [0]]


def test_mc_hypervolume_square():
    assert mc_hypervolume([[0.5, 0.5]], 100_000, seed=0) == pytest.approx(0.25, abs=5e-3)


def test_corner_search():
    feasible = lambda x: x[0] <= 0.5
    assert np.array_equal(corner_search([0.505, 0.3], feasible), [0.5, 0.3])
    assert corner_search([0.505], lambda x: False) is None
    with pytest.raises(ValueError):
        corner_search(np.zeros(17), feasible)


def test_hand_tradeoff():
    assert hand_tradeoff([[0, 10], [1, 5], [3, 4]])[1] == pytest.approx(5.0)
    assert hand_tradeoff([[1, 1], [1, 1]]) == [None, None]
