"""Bounded Nelder-Mead simplex search.

One source serves two execution modes: compiled with numba when the
objective is itself a numba function (the repair hot loop), and as plain
Python otherwise (likelihood fits). Trial vertices are clamped to the box.
"""

from __future__ import annotations

from collections.abc import Callable
from dataclasses import dataclass

import numba
import numpy as np
from numba.core.registry import CPUDispatcher
from numba.extending import register_jitable

ALPHA = 1.0  # reflection
GAMMA = 2.0  # expansion
RHO = 0.5  # contraction
SIGMA = 0.5  # shrink


@register_jitable
def _clamp(v, lower, upper):
    # Mirror an overshoot back into the box, then clamp what is still out.
    for i in range(v.shape[0]):
        if v[i] < lower[i]:
            v[i] = 2.0 * lower[i] - v[i]
        elif v[i] > upper[i]:
            v[i] = 2.0 * upper[i] - v[i]
        if v[i] < lower[i]:
            v[i] = lower[i]
        elif v[i] > upper[i]:
            v[i] = upper[i]
    return v


@register_jitable
def _insert_sorted(sim, fs, k):
    # Vertex k is the only one out of order; bubble it into place.
    while k > 0 and fs[k] < fs[k - 1]:
        fs[k], fs[k - 1] = fs[k - 1], fs[k]
        for j in range(sim.shape[1]):
            sim[k, j], sim[k - 1, j] = sim[k - 1, j], sim[k, j]
        k -= 1
    while k < fs.shape[0] - 1 and fs[k] > fs[k + 1]:
        fs[k], fs[k + 1] = fs[k + 1], fs[k]
        for j in range(sim.shape[1]):
            sim[k, j], sim[k + 1, j] = sim[k + 1, j], sim[k, j]
        k += 1


def _nm_core(f, params, x0, step, lower, upper, max_iter, xtol, ftol, stop_value):
    n = x0.shape[0]
    sim = np.empty((n + 1, n))
    fs = np.empty(n + 1)
    sim[0] = x0
    fs[0] = f(sim[0].copy(), params)
    nfev = 1
    for i in range(n):
        v = x0.copy()
        v[i] = x0[i] + step[i]
        if v[i] > upper[i]:
            v[i] = x0[i] - step[i]
        v = _clamp(v, lower, upper)
        sim[i + 1] = v
        fs[i + 1] = f(v, params)
        nfev += 1
    order = np.argsort(fs, kind="mergesort")
    sim = sim[order]
    fs = fs[order]

    centroid = np.empty(n)
    trial = np.empty(n)
    it = 0
    while fs[0] > stop_value and it < max_iter:
        size = 0.0
        for i in range(1, n + 1):
            for j in range(n):
                d = abs(sim[i, j] - sim[0, j])
                if d > size:
                    size = d
        if size <= xtol or fs[n] - fs[0] <= ftol:
            break
        it += 1

        for j in range(n):
            acc = 0.0
            for i in range(n):
                acc += sim[i, j]
            centroid[j] = acc / n

        for j in range(n):
            trial[j] = centroid[j] + ALPHA * (centroid[j] - sim[n, j])
        xr = _clamp(trial.copy(), lower, upper)
        fr = f(xr, params)
        nfev += 1
        if fr < fs[0]:
            for j in range(n):
                trial[j] = centroid[j] + GAMMA * (centroid[j] - sim[n, j])
            xe = _clamp(trial.copy(), lower, upper)
            fe = f(xe, params)
            nfev += 1
            if fe < fr:
                sim[n] = xe
                fs[n] = fe
            else:
                sim[n] = xr
                fs[n] = fr
            _insert_sorted(sim, fs, n)
            continue
        if fr < fs[n - 1]:
            sim[n] = xr
            fs[n] = fr
            _insert_sorted(sim, fs, n)
            continue
        if fr < fs[n]:
            for j in range(n):
                trial[j] = centroid[j] + RHO * (xr[j] - centroid[j])
            xc = _clamp(trial.copy(), lower, upper)
            fc = f(xc, params)
            nfev += 1
            accept = fc <= fr
        else:
            for j in range(n):
                trial[j] = centroid[j] + RHO * (sim[n, j] - centroid[j])
            xc = _clamp(trial.copy(), lower, upper)
            fc = f(xc, params)
            nfev += 1
            accept = fc < fs[n]
        if accept:
            sim[n] = xc
            fs[n] = fc
            _insert_sorted(sim, fs, n)
            continue
        for i in range(1, n + 1):
            for j in range(n):
                sim[i, j] = sim[0, j] + SIGMA * (sim[i, j] - sim[0, j])
            fs[i] = f(sim[i].copy(), params)
            nfev += 1
        order = np.argsort(fs, kind="mergesort")
        sim = sim[order]
        fs = fs[order]
    return sim[0].copy(), fs[0], it, nfev


_nm_jit = numba.njit(nogil=True)(_nm_core)


@dataclass(frozen=True)
class SimplexResult:
    x: np.ndarray
    fun: float
    n_iter: int
    n_fev: int


def nelder_mead(
    f: Callable,
    x0: np.ndarray,
    *,
    params: np.ndarray | None = None,
    step: np.ndarray | float = 0.05,
    lower: np.ndarray | None = None,
    upper: np.ndarray | None = None,
    max_iter: int = 2000,
    xtol: float = 1e-10,
    ftol: float = 0.0,
    stop_value: float = -np.inf,
) -> SimplexResult:
    """Minimize ``f(x, params)`` from ``x0`` inside an optional box.

    Stops on ``max_iter``, when the simplex is smaller than ``xtol`` in every
    coordinate, when the vertex value spread is at most ``ftol``, or as soon
    as the best vertex reaches ``stop_value``.
    """
    x0 = np.array(x0, dtype=float)
    n = x0.size
    params = np.zeros(0) if params is None else np.asarray(params, dtype=float)
    step = np.broadcast_to(np.asarray(step, dtype=float), (n,)).copy()
    lower = np.full(n, -np.inf) if lower is None else np.asarray(lower, dtype=float)
    upper = np.full(n, np.inf) if upper is None else np.asarray(upper, dtype=float)
    core = _nm_jit if isinstance(f, CPUDispatcher) else _nm_core
    x, fun, it, nfev = core(
        f, params, x0, step, lower, upper, int(max_iter), float(xtol), float(ftol), float(stop_value)
    )
    return SimplexResult(np.asarray(x), float(fun), int(it), int(nfev))
