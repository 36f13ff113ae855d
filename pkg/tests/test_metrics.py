import warnings

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from machopt.metrics import (
    HvReference,
    dense_rank_descending,
    feasibility_study,
    filter_rows,
    hypervolume2d,
    median_trace,
    rhve,
    tradeoff,
)
from machopt.oracles import hand_tradeoff, mc_hypervolume
from machopt.problem import BoundsSpec, Problem

UNIT = HvReference([0.0, 0.0], [1.0, 1.0])
points = st.lists(st.tuples(st.floats(0, 1), st.floats(0, 1)), min_size=1, max_size=12)


def test_hv_examples():
    assert hypervolume2d([[0.0, 0.0]], UNIT) == 1.0
    assert hypervolume2d(np.zeros((0, 2)), UNIT) == 0.0
    front = [[0.2, 0.8], [0.5, 0.5], [0.8, 0.2]]
    assert hypervolume2d(front, UNIT) == pytest.approx(0.37)
    assert hypervolume2d(front + [[0.6, 0.6]], UNIT) == hypervolume2d(front, UNIT)
    assert abs(mc_hypervolume(front, 200_000, seed=1) - 0.37) < 5e-3


def test_hv_drops_points_outside_box():
    with warnings.catch_warnings(record=True) as caught:
        warnings.simplefilter("always")
        hv = hypervolume2d([[0.5, 0.5], [2.0, -1.0]], UNIT)
    assert hv == pytest.approx(0.25) and caught


def test_reference_validation():
    with pytest.raises(ValueError):
        HvReference([0, 0], [0, 1])
    ref = HvReference.from_fronts([[1.0, 5.0]], [[3.0, 5.0]])
    assert np.array_equal(ref.best, [1, 5]) and np.array_equal(ref.worst, [3, 6])


@given(points, st.tuples(st.floats(0, 1), st.floats(0, 1)))
def test_hv_monotone_under_adding(front, extra):
    base = hypervolume2d(front, UNIT)
    assert 0.0 <= base <= 1.0
    assert hypervolume2d(front + [extra], UNIT) >= base - 1e-15


def test_hv_matches_monte_carlo():
    rng = np.random.default_rng(0)
    worst = 0.0
    for _ in range(5):
        n = rng.integers(1, 15)
        front = rng.random((n, 2))
        worst = max(worst, abs(hypervolume2d(front, UNIT) - mc_hypervolume(front, 200_000, seed=int(n))))
    assert worst < 5e-3


def test_rhve():
    F = np.array([[0.9, 0.9], [0.5, 0.5], [0.7, 0.1], [0.1, 0.7], [0.2, 0.2]])
    feas = np.array([True, True, False, True, True])
    trace = rhve(F, feas, UNIT, 2)
    assert [t for t, _ in trace] == [2, 4, 5]
    hv = [v for _, v in trace]
    assert hv == sorted(hv)
    assert hv[0] == pytest.approx(0.25)
    single = rhve(F, feas, UNIT, 5)
    assert single == [(5, pytest.approx(hypervolume2d(F[feas], UNIT)))]
    with pytest.raises(ValueError):
        rhve(F, feas, UNIT, 0)


@given(points)
def test_rhve_non_decreasing(front):
    F = np.array(front)
    hv = [v for _, v in rhve(F, np.ones(len(F), bool), UNIT, 1)]
    assert all(b >= a - 1e-15 for a, b in zip(hv, hv[1:]))


def test_median_trace():
    traces = [[(10, v), (20, v + 1)] for v in (0.1, 0.5, 0.3, 0.9, 0.2)]
    assert median_trace(traces) == [(10, 0.3), (20, 1.3)]
    with pytest.raises(ValueError):
        median_trace([[(10, 0.1)], [(20, 0.1)]])


def test_tradeoff_examples():
    result = dict(tradeoff([[0, 10], [1, 5], [3, 4]]))
    assert result[1] == pytest.approx(5.0)
    assert dict(tradeoff([[0, 1], [1, 0]])) == {0: 1.0, 1: 1.0}
    assert tradeoff([[1, 1]]) == []
    ranked = tradeoff([[0, 10], [1, 5], [3, 4]])
    assert [v for _, v in ranked] == sorted((v for _, v in ranked), reverse=True)


@given(st.lists(st.tuples(st.integers(0, 50), st.integers(0, 50)), min_size=2, max_size=10, unique=True))
def test_tradeoff_matches_hand_oracle(front):
    mine = dict(tradeoff(front))
    for i, v in enumerate(hand_tradeoff(front)):
        if v is None:
            assert i not in mine
        else:
            assert mine[i] == pytest.approx(v)


@given(st.lists(st.tuples(st.floats(0, 10), st.floats(0, 10)), min_size=2, max_size=8), st.randoms())
def test_tradeoff_permutation_and_scaling(front, rnd):
    base = dict(tradeoff(front))
    order = list(range(len(front)))
    rnd.shuffle(order)
    shuffled = dict(tradeoff([front[i] for i in order]))
    assert {order[k]: v for k, v in shuffled.items()} == pytest.approx(base)
    # a power of two keeps every difference exact
    scaled = dict(tradeoff([(4 * a, 4 * b) for a, b in front]))
    assert scaled == pytest.approx(base)


@given(st.lists(st.tuples(st.integers(0, 50), st.integers(0, 50)), min_size=2, max_size=10, unique=True))
def test_tradeoff_scale_free_on_integer_fronts(front):
    assert dict(tradeoff([(3 * a, 3 * b) for a, b in front])) == pytest.approx(dict(tradeoff(front)))


def test_tradeoff_argmax_stable_under_sign_convention():
    rng = np.random.default_rng(4)
    tau = np.sort(rng.uniform(20, 40, 12))
    pulse = np.sort(rng.uniform(5, 30, 12))  # more torque costs more pulsation
    a = tradeoff(np.column_stack([-tau, pulse]))
    b = tradeoff(np.column_stack([100.0 - tau, pulse]))
    assert a[0][0] == b[0][0]


def test_feasibility_study_unconstrained():
    p = Problem("box", BoundsSpec([0, 0], [1, 1]), lambda x: x, None, (False, False))
    stats = feasibility_study(p, 3, 10, 0)
    assert stats.feasible_fraction == 1.0 and stats.samples == 30


def test_feasibility_study_deterministic(ipm):
    a = feasibility_study(ipm, 3, 50, 11)
    b = feasibility_study(ipm, 3, 50, 11)
    assert np.array_equal(a.batch_fractions, b.batch_fractions)
    assert a.violation_fraction[0] == 0.0


def test_dense_rank():
    assert dense_rank_descending([0.3, 0.1, 0.3, 0.0, 0.0]).tolist() == [1, 2, 1, 3, 3]


def test_filter_rows():
    rows = [{"a": "1", "b": "5"}, {"a": "3", "b": "2"}]
    assert filter_rows(rows, [("a", "<=", 2.0)]) == rows[:1]
    assert filter_rows(rows, [("a", ">", 0.0), ("b", "<", 3.0)]) == rows[1:]
