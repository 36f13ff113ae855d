import threading

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from machopt.problem import (
    BoundsSpec,
    BudgetExhausted,
    ConstraintReport,
    EvaluationBudget,
    ceil_grid,
    constrained_dominates,
    floor_grid,
    from_index,
    grid_key,
    is_dominated,
    on_grid,
    snap,
)

vec2 = st.lists(st.integers(-3, 3), min_size=2, max_size=2)


def test_dominance_examples():
    assert is_dominated((1, 1), (0, 0))
    assert not is_dominated((0, 1), (1, 0))
    assert not is_dominated((1, 0), (0, 1))
    assert not is_dominated((2, 2), (2, 2))


def test_dominance_length_mismatch():
    with pytest.raises(ValueError):
        is_dominated((1, 2), (1, 2, 3))


@given(vec2)
def test_dominance_irreflexive(a):
    assert not is_dominated(a, a)


@given(vec2, vec2)
def test_dominance_asymmetric(a, b):
    assert not (is_dominated(a, b) and is_dominated(b, a))


@given(vec2, vec2, vec2)
def test_dominance_transitive(a, b, c):
    # b dominates a and c dominates b => c dominates a
    if is_dominated(a, b) and is_dominated(b, c):
        assert is_dominated(a, c)


def test_constrained_domination_rules():
    assert constrained_dominates((9, 9), 0.0, (0, 0), 1.0)
    assert not constrained_dominates((0, 0), 1.0, (9, 9), 0.0)
    assert constrained_dominates((9, 9), 0.5, (0, 0), 1.0)
    assert constrained_dominates((0, 0), 0.0, (1, 1), 0.0)


def test_bounds_validation():
    with pytest.raises(ValueError):
        BoundsSpec(np.array([0.0, 1.0]), np.array([1.0, 1.0]))
    with pytest.raises(ValueError):
        BoundsSpec(np.array([0.0]), np.array([1.0, 2.0]))
    b = BoundsSpec([0, 0], [1, 2])
    assert b.dimension == 2
    assert b.contains([1.0, 2.0]) and not b.contains([1.01, 0])


def test_report_cv_and_feasibility():
    r = ConstraintReport(np.array([-1.0, 0.0, 2.5, 0.5]))
    assert r.cv == 3.0 and not r.feasible
    ok = ConstraintReport(np.array([-1.0, 0.0]))
    assert ok.cv == 0.0 and ok.feasible
    assert not ConstraintReport(np.array([-1.0]), degenerate=True).feasible


@given(st.lists(st.floats(-1e6, 1e6), min_size=2, max_size=2))
def test_orientation_round_trip(raw):
    from machopt.ipm import ipm_problem

    p = ipm_problem()
    raw = np.array(raw)
    assert np.array_equal(p.to_raw(p.to_min(raw)), raw)
    assert p.to_min(raw)[0] == -raw[0] and p.to_min(raw)[1] == raw[1]


def test_budget_exhaustion(ipm):
    from machopt.ipm import X_REF

    budget = EvaluationBudget(1)
    f = ipm.evaluate_exact(X_REF, budget)
    assert budget.ese_used == 1 and np.all(np.isfinite(f))
    with pytest.raises(BudgetExhausted):
        ipm.evaluate_exact(X_REF, budget)
    assert budget.ese_used == 1


def test_exact_evaluation_is_deterministic(ipm):
    from machopt.ipm import X_REF

    budget = EvaluationBudget(2)
    a = ipm.evaluate_exact(X_REF, budget)
    b = ipm.evaluate_exact(X_REF, budget)
    assert a.tobytes() == b.tobytes()


def test_bnh_raw_objectives(bnh):
    budget = EvaluationBudget(2)
    assert np.allclose(bnh.evaluate_exact(np.array([0.0, 0.0]), budget), [0.0, 50.0])
    assert np.allclose(bnh.evaluate_exact(np.array([5.0, 3.0]), budget), [136.0, 4.0])
    assert bnh.is_feasible(np.array([0.0, 0.0]))


def test_dimension_mismatch_is_usage_error(ipm):
    with pytest.raises(ValueError):
        ipm.evaluate_constraints(np.zeros(3))


def test_constraints_do_not_consume_budget(ipm):
    from machopt.ipm import X_REF

    budget = EvaluationBudget(5)
    for _ in range(10):
        ipm.evaluate_constraints(X_REF)
    assert budget.ese_used == 0


def test_budget_counter_is_atomic():
    budget = EvaluationBudget(4000)

    def work():
        for _ in range(1000):
            budget.consume()

    threads = [threading.Thread(target=work) for _ in range(4)]
    for t in threads:
        t.start()
    for t in threads:
        t.join()
    assert budget.ese_used == 4000
    with pytest.raises(BudgetExhausted):
        budget.consume()


def test_grid_helpers():
    assert on_grid(np.array([1.23, 0.1, 2.0]))
    assert not on_grid(np.array([1.234]))
    assert floor_grid(np.array([1.239]))[0] == 1.23
    assert ceil_grid(np.array([1.231]))[0] == 1.24
    # values already on the grid up to float noise stay put
    assert floor_grid(np.array([0.1 + 0.2]))[0] == 0.3
    assert snap(np.array([0.125]))[0] == 0.12  # exact binary tie goes down
    assert snap(np.array([1.2351]))[0] == 1.24
    assert str(from_index(np.array([-0.0]))[0]) == "0.0"
    assert grid_key(np.array([0.1 + 0.2, 1.0])) == grid_key(np.array([0.3, 1.0]))


@given(st.floats(-1000, 1000))
def test_floor_ceil_bracket(v):
    lo = floor_grid(np.array([v]))[0]
    hi = ceil_grid(np.array([v]))[0]
    assert lo <= v + 1e-9 and hi >= v - 1e-9
    assert hi - lo <= 0.01 + 1e-9
    assert on_grid(np.array([lo, hi]))
