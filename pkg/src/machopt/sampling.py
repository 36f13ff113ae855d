"""Latin hypercube sampling on the 0.01 grid and feasible-by-construction DOE."""

from __future__ import annotations

import logging

import numpy as np

from machopt.problem import BoundsSpec, Problem, from_index, grid_key
from machopt.repair import RepairConfig, RepairFailed, repair

log = logging.getLogger(__name__)

_EPS = 1e-9


class PrecisionConflict(ValueError):
    """An LHS stratum is narrower than the 0.01 grid."""


class InitializationError(RuntimeError):
    """Constrained sampling could not produce enough feasible designs."""


def _bin_index_range(edges: np.ndarray, last_closed: bool) -> tuple[np.ndarray, np.ndarray]:
    # Grid indices k with edges[b] <= k/100 < edges[b+1] (last bin closed).
    lo = np.ceil(edges[:-1] * 100.0 - _EPS)
    hi_open = np.ceil(edges[1:] * 100.0 - _EPS) - 1.0
    if last_closed:
        hi_open[-1] = np.floor(edges[-1] * 100.0 + _EPS)
    return lo, hi_open


def lhs(
    n: int,
    bounds: BoundsSpec,
    rng_seed: int | np.random.Generator,
    strict_strata: bool = True,
) -> np.ndarray:
    """Latin hypercube sample of ``n`` points on the 0.01 grid.

    Each variable's range is cut into ``n`` equal bins and every bin gets
    exactly one uniform draw, which is rounded to the nearest 0.01 (ties
    down). With ``strict_strata`` the rounded value is also kept inside its
    bin, so stratification survives the rounding; without it, bins narrower
    than the grid are allowed and stratification holds for the draws only.

    Returns:
        ``(n, dimension)`` array.

    Raises:
        PrecisionConflict: if ``strict_strata`` and a bin is narrower than 0.01.
    """
    if n < 1:
        raise ValueError("n must be at least 1")
    rng = rng_seed if isinstance(rng_seed, np.random.Generator) else np.random.default_rng(rng_seed)
    width = bounds.span / n
    if strict_strata and np.any(width < 0.01 - _EPS):
        bad = int(np.argmin(width))
        raise PrecisionConflict(
            f"variable {bad + 1}: bin width {width[bad]:.4g} is below the 0.01 grid for n={n}"
        )
    out = np.empty((n, bounds.dimension))
    for d in range(bounds.dimension):
        edges = bounds.lower[d] + width[d] * np.arange(n + 1)
        edges[-1] = bounds.upper[d]
        k_lo, k_hi = _bin_index_range(edges, last_closed=True)
        perm = rng.permutation(n)
        u = rng.random(n)
        raw = edges[perm] + u * width[d]
        k = np.floor(raw * 100.0)
        frac = raw * 100.0 - k
        k = np.where(frac > 0.5, k + 1.0, k)
        if strict_strata:
            k = np.clip(k, k_lo[perm], k_hi[perm])
        else:
            k = np.clip(k, np.ceil(bounds.lower[d] * 100.0 - _EPS), np.floor(bounds.upper[d] * 100.0 + _EPS))
        out[:, d] = from_index(k)
    return out


def constrained_sampling(
    n_doe: int,
    problem: Problem,
    rng_seed: int | np.random.Generator,
    cfg: RepairConfig = RepairConfig(),
    max_rounds: int = 50,
) -> np.ndarray:
    """``n_doe`` distinct feasible grid designs: LHS, repair, top up.

    Raises:
        InitializationError: after ``max_rounds`` LHS rounds without enough
            feasible, distinct designs.
    """
    if n_doe < 1:
        raise ValueError("n_doe must be at least 1")
    rng = rng_seed if isinstance(rng_seed, np.random.Generator) else np.random.default_rng(rng_seed)
    kept: list[np.ndarray] = []
    seen: set[tuple[int, ...]] = set()
    failed = duplicates = 0
    for _ in range(max_rounds):
        batch = lhs(n_doe, problem.bounds, rng, strict_strata=False)
        for x in batch:
            if not problem.is_feasible(x):
                try:
                    x = repair(x, problem, cfg, rng)
                except RepairFailed:
                    failed += 1
                    continue
            key = grid_key(x)
            if key in seen:
                duplicates += 1
                continue
            seen.add(key)
            kept.append(x)
            if len(kept) == n_doe:
                return np.array(kept)
    raise InitializationError(
        f"only {len(kept)} of {n_doe} feasible designs after {max_rounds} rounds "
        f"({failed} repair failures, {duplicates} duplicates)"
    )
