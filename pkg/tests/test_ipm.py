import csv

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st
from scipy.stats import spearmanr

from machopt.ipm import (
    INTERMEDIATE_NAMES,
    IPM_BOUNDS,
    X_LOWER,
    X_REF,
    X_UPPER,
    compute_intermediates,
    export_bounds_csv,
    get_problem,
    ipm_constraints,
    proxy_objectives,
)
from machopt.oracles import direct_geometry

unit10 = st.lists(st.floats(0.0, 1.0), min_size=10, max_size=10)


def _in_box(u):
    return X_LOWER + np.asarray(u) * (X_UPPER - X_LOWER)


def test_constant_intermediates():
    v = compute_intermediates(X_REF)
    assert v["IM_OD"] == pytest.approx(160.4)
    assert v["ZIM_VE"] == pytest.approx(22.5)
    assert v["ZIM_OR"] == pytest.approx(80.2)
    assert v["ZOS_Y3"] == pytest.approx(1.67)
    assert v["ZOS_VE"] == pytest.approx(3.75)


def test_pole_cap_example():
    x = X_REF.copy()
    x[0] = 7.65
    assert compute_intermediates(x)["ZIM_X2"] == pytest.approx(72.55)


def test_reference_design_feasible_and_defined():
    g, degenerate = ipm_constraints(X_REF)
    assert not degenerate and np.all(g <= 0)
    assert compute_intermediates(X_REF).all_defined
    _, g_oracle = direct_geometry(X_REF)
    assert np.allclose(g, g_oracle, rtol=0, atol=1e-10)


def test_slot_opening_example():
    x = X_REF.copy()
    x[9] = 2.26
    assert ipm_constraints(x)[0][7] == pytest.approx(-1.08)


def test_lower_bounds_not_degenerate():
    g, degenerate = ipm_constraints(X_LOWER)
    assert not degenerate
    v = compute_intermediates(X_LOWER)
    assert v.defined_mask["ZOS_V1B"] and v.defined_mask["ZIM_Y8"]


@pytest.mark.parametrize("form", ["edge", "printed"])
@given(u=unit10)
def test_matches_direct_substitution_oracle(form, u):
    x = _in_box(u)
    g, degenerate = ipm_constraints(x, form)
    try:
        values, g_oracle = direct_geometry(x, form)
    except ValueError:
        assert degenerate
        return
    assert not degenerate
    assert np.allclose(g, g_oracle, rtol=1e-12, atol=1e-9)
    mine = compute_intermediates(x)
    for name in INTERMEDIATE_NAMES:
        assert mine[name] == pytest.approx(values[name], rel=1e-12, abs=1e-9)


def test_never_violated_constraints():
    rng = np.random.default_rng(3)
    X = X_LOWER + rng.random((100_000, 10)) * (X_UPPER - X_LOWER)
    worst = np.full(3, -np.inf)
    for x in X:
        g, _ = ipm_constraints(x)
        worst = np.maximum(worst, g[[0, 7, 8]])
    assert np.all(worst <= 0.0)


@given(u=unit10)
def test_g9_identity(u):
    x = _in_box(u)
    v = compute_intermediates(x)
    if not v.all_defined:
        return
    g9 = ipm_constraints(x)[0][8]
    inside = 0.0 <= v["ZOS_V1"] <= 2 * v["ZOS_VE"]
    if abs(g9) > 1e-9:
        assert (g9 <= 0) == inside


@given(u=unit10)
def test_constraints_are_pure(u):
    x = _in_box(u)
    a, da = ipm_constraints(x)
    b, db = ipm_constraints(x.copy())
    assert a.tobytes() == b.tobytes() and da == db


def test_constraints_continuous_away_from_degeneracy():
    rng = np.random.default_rng(11)
    checked = 0
    for _ in range(200):
        x = X_LOWER + rng.random(10) * (X_UPPER - X_LOWER)
        g0, d0 = ipm_constraints(x)
        if d0:
            continue
        for i in range(10):
            h = 1e-7 * (X_UPPER[i] - X_LOWER[i])
            xp = x.copy()
            xp[i] += h
            g1, d1 = ipm_constraints(xp)
            if d1:
                continue
            # g9 has an |.| kink; skip steps straddling it
            jump = np.abs(g1 - g0)
            assert np.all(jump[[0, 1, 2, 3, 4, 5, 6, 7, 9]] < 1e-3)
            checked += 1
    assert checked > 1000


def test_degenerate_point_gets_sentinel():
    x = X_REF.copy()
    x[6], x[7], x[8] = 5.0, 8.0, 1.4  # tiny slot height: negative radicand
    g, degenerate = ipm_constraints(x)
    assert degenerate and np.max(g) >= 1e6
    assert not get_problem("ipm-proxy-v1").is_feasible(x)


def test_proxy_reference():
    f = proxy_objectives(X_REF)
    assert np.all(np.isfinite(f)) and -f[0] > 0
    assert f.tobytes() == proxy_objectives(X_REF.copy()).tobytes()
    assert f[1] > 0


def test_proxy_monotone_in_bridge_height():
    lo, hi = X_REF.copy(), X_REF.copy()
    lo[4], hi[4] = 1.7, 2.2
    f_lo, f_hi = proxy_objectives(lo), proxy_objectives(hi)
    assert -f_hi[0] < -f_lo[0] and f_hi[1] > f_lo[1]


def test_proxy_objectives_conflict(ipm):
    rng = np.random.default_rng(5)
    tau, pulse = [], []
    while len(tau) < 1000:
        x = X_LOWER + rng.random(10) * (X_UPPER - X_LOWER)
        if ipm.is_feasible(x):
            f = proxy_objectives(x)
            tau.append(-f[0])
            pulse.append(f[1])
    rho = spearmanr(tau, pulse).statistic
    assert rho > 0


def test_registry():
    assert get_problem("bnh").name == "bnh"
    with pytest.raises(KeyError, match="ipm-proxy-v1"):
        get_problem("nope")


def test_bounds_export(tmp_path):
    path = tmp_path / "bounds.csv"
    export_bounds_csv(path)
    rows = list(csv.DictReader(open(path)))
    assert len(rows) == 10
    assert rows[3]["reference"] == "145.35" and rows[3]["upper"] == "174.42"


def test_reference_within_bounds():
    assert IPM_BOUNDS.contains(X_REF)
    assert np.all(np.abs(X_REF * 0.8 - X_LOWER) < 0.02 * X_REF)
    assert np.all(np.abs(X_REF * 1.2 - X_UPPER) < 0.02 * X_REF)
