"""Two-phase repair of infeasible designs.

Phase 1 moves an infeasible point to a nearby feasible one by minimizing the
squared distance plus an escalating quadratic exterior penalty with a
bounded simplex search. Phase 2 rounds every variable to the 0.01 grid,
visiting variables in random permutation order and keeping whichever of
floor/ceil (nearer first) preserves feasibility.
"""

from __future__ import annotations

import functools
from dataclasses import dataclass

import numba
import numpy as np
from numba.core.registry import CPUDispatcher

from machopt.problem import Problem, ceil_grid, floor_grid
from machopt.simplex import nelder_mead


class RepairFailed(RuntimeError):
    """No feasible (or no feasible on-grid) point could be produced."""


@dataclass(frozen=True)
class RepairConfig:
    rho: int = 100
    max_iter: int = 2000
    restarts: int = 3
    penalty_weights: tuple[float, ...] = (1e3, 1e5, 1e7)
    slack: float = 1e-9
    step_fraction: float = 0.02
    xtol: float = 1e-10

    def __post_init__(self) -> None:
        if self.rho < 1:
            raise ValueError("rho must be at least 1")
        w = self.penalty_weights
        if not w or any(b <= a for a, b in zip(w, w[1:])) or w[0] <= 0:
            raise ValueError("penalty weights must be positive and strictly increasing")
        if self.restarts < 0 or self.max_iter < 1:
            raise ValueError("restarts must be >= 0 and max_iter >= 1")


@dataclass(frozen=True)
class RepairOutcome:
    x: np.ndarray | None
    status: str  # "unchanged" | "repaired" | "failed"
    distance: float
    simplex_iterations: int = 0
    permutations: int = 0


def _penalty_sources(g_of):
    def dist_penalty(x, params):
        g = g_of(x)
        d = 0.0
        for i in range(x.shape[0]):
            d += (x[i] - params[2 + i]) ** 2
        v = 0.0
        for j in range(g.shape[0]):
            t = g[j] + params[1]
            if t > 0.0:
                v += t * t
        return d + params[0] * v

    def violation(x, params):
        g = g_of(x)
        v = 0.0
        for j in range(g.shape[0]):
            t = g[j] + params[1]
            if t > 0.0:
                v += t * t
        return v

    return dist_penalty, violation


@functools.lru_cache(maxsize=None)
def _compiled_penalties(kernel):
    dist_penalty, violation = _penalty_sources(kernel)
    return numba.njit(nogil=True)(dist_penalty), numba.njit(nogil=True)(violation)


def _penalties(problem: Problem):
    kernel = problem.constraint_kernel
    if isinstance(kernel, CPUDispatcher):
        return _compiled_penalties(kernel)
    fn = problem.constraint_fn

    def g_of(x):
        g, degenerate = fn(x)
        g = np.asarray(g, dtype=float)
        return np.where(degenerate, np.maximum(g, 1e6), g)

    return _penalty_sources(g_of)


def _g(problem: Problem, x: np.ndarray) -> np.ndarray:
    if problem.constraint_fn is None:
        return np.zeros(0)
    if problem.constraint_kernel is not None:
        return problem.constraint_kernel(x)
    g, degenerate = problem.constraint_fn(x)
    return np.full(len(g), np.inf) if degenerate else np.asarray(g, dtype=float)


def _feasible(problem: Problem, x: np.ndarray, slack: float = 0.0) -> bool:
    return bool(np.all(_g(problem, x) <= -slack))


def _restore(x: np.ndarray, problem: Problem, cfg: RepairConfig) -> tuple[np.ndarray, int]:
    if _feasible(problem, x):
        return x.copy(), 0
    dist_penalty, violation = _penalties(problem)
    lo, hi = problem.bounds.lower, problem.bounds.upper
    step = cfg.step_fraction * problem.bounds.span
    params = np.concatenate(([0.0, cfg.slack], x))
    best = x.copy()
    iterations = 0
    # One warm-started search per weight; restarts only at the last weight,
    # refreshing simplices that collapsed onto a box face.
    final = len(cfg.penalty_weights) - 1
    for stage, w in enumerate(cfg.penalty_weights):
        params[0] = w
        f_best = dist_penalty(best, params)
        for _ in range(1 + (cfg.restarts if stage == final else 0)):
            res = nelder_mead(
                dist_penalty, best, params=params, step=step, lower=lo, upper=hi,
                max_iter=cfg.max_iter, xtol=cfg.xtol,
            )  # fmt: skip
            iterations += res.n_iter
            improved = res.fun < f_best - 1e-12 * max(1.0, abs(f_best))
            if res.fun < f_best:
                best, f_best = res.x, res.fun
            if not improved:
                break

    # The penalty optimum sits a hair outside; step inward until strict.
    polish_step = 1e-4 * step
    for _ in range(1 + cfg.restarts):
        if _feasible(problem, best, cfg.slack):
            return best, iterations
        res = nelder_mead(
            violation, best, params=params, step=polish_step, lower=lo, upper=hi,
            max_iter=cfg.max_iter, xtol=cfg.xtol, stop_value=0.0,
        )  # fmt: skip
        iterations += res.n_iter
        best = res.x
        polish_step = polish_step * 100.0
    if _feasible(problem, best, cfg.slack):
        return best, iterations
    raise RepairFailed(f"no feasible point found near {x.tolist()}")


def repair_feasibility(x, problem: Problem, cfg: RepairConfig = RepairConfig()) -> np.ndarray:
    """Closest feasible point (locally) to ``x``; ``x`` itself if already feasible."""
    x = problem.bounds.clip(np.asarray(x, dtype=float))
    return _restore(x, problem, cfg)[0]


def _round_in_order(x_real, problem, cfg, rng) -> tuple[np.ndarray, int]:
    lo = floor_grid(x_real)
    hi = ceil_grid(x_real)
    n = x_real.size
    for attempt in range(1, cfg.rho + 1):
        y = x_real.copy()
        ok = True
        for i in rng.permutation(n):
            if lo[i] == hi[i]:
                y[i] = lo[i]
                continue
            nearer_floor = x_real[i] - lo[i] <= hi[i] - x_real[i]
            options = (lo[i], hi[i]) if nearer_floor else (hi[i], lo[i])
            for value in options:
                trial = y.copy()
                trial[i] = value
                if _feasible(problem, trial):
                    y = trial
                    break
            else:
                ok = False
                break
        if ok:
            return y, attempt
    raise RepairFailed(f"precision repair failed after {cfg.rho} permutations")


def repair_precision(x_real, problem: Problem, cfg: RepairConfig, rng: np.random.Generator) -> np.ndarray:
    """Round a feasible continuous vector onto the 0.01 grid, keeping feasibility.

    Raises:
        RepairFailed: if ``cfg.rho`` permutations all dead-end.
    """
    return _round_in_order(np.asarray(x_real, dtype=float), problem, cfg, rng)[0]


def repair_with_info(x, problem: Problem, cfg: RepairConfig, rng: np.random.Generator) -> RepairOutcome:
    """Full repair that reports status instead of raising."""
    x = np.asarray(x, dtype=float)
    x_in = problem.bounds.clip(x)
    try:
        x_real, iterations = _restore(x_in, problem, cfg)
        x_out, perms = _round_in_order(x_real, problem, cfg, rng)
    except RepairFailed:
        return RepairOutcome(None, "failed", float("nan"))
    distance = float(np.linalg.norm(x_out - x))
    status = "unchanged" if np.array_equal(x_out, x) else "repaired"
    return RepairOutcome(x_out, status, distance, iterations, perms)


def repair(x, problem: Problem, cfg: RepairConfig, rng: np.random.Generator) -> np.ndarray:
    """Feasible, two-decimal design near ``x``.

    Raises:
        RepairFailed: propagated from either phase; callers substitute a
            freshly sampled feasible design.
    """
    x = problem.bounds.clip(np.asarray(x, dtype=float))
    x_real, _ = _restore(x, problem, cfg)
    return _round_in_order(x_real, problem, cfg, rng)[0]
