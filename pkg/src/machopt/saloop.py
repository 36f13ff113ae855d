"""Surrogate-assisted NSGA-II with repair.

Each cycle fits one metamodel per objective on the whole archive, runs
``k`` generations of repaired NSGA-II on the predicted objectives, clusters
the final population in normalized predicted-objective space and evaluates
one roulette-chosen design per cluster exactly.
"""

from __future__ import annotations

import logging
from collections.abc import Sequence
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from machopt import streams
from machopt.config import RunConfig
from machopt.kmeans import kmeans
from machopt.nsga2 import (
    Archive,
    _evaluate,
    assign_rank_crowding,
    crowding_distance,
    eliminate_duplicates,
    generate_offspring,
    non_dominated_sort,
    survival,
    survival_indices,
)
from machopt.problem import EvaluationBudget, Individual, Problem, Source, grid_key
from machopt.sampling import constrained_sampling
from machopt.surrogate import FitFailed, SurrogatePair, fit_pair
from machopt.surrogate.selection import MIN_SELECTION_POINTS

log = logging.getLogger(__name__)

# Leading tag of the substream key for generations inside surrogate cycles.
_SURROGATE_TAG = 1
_FALLBACK_TAG = 2


@dataclass
class SARun:
    archive: Archive
    cycles: list[dict] = field(default_factory=list)
    selection: list[dict] = field(default_factory=list)


def _as_candidates(xs, problem: Problem, pair: SurrogatePair, gen: int) -> list[Individual]:
    if len(xs) == 0:
        return []
    F = pair.predict(np.array(xs))
    return [
        Individual(x=x, g=problem.evaluate_constraints(x), f=f, source=Source.ASE, gen=gen) for x, f in zip(xs, F)
    ]


def surrogate_optimize(
    archive: Archive,
    pair: SurrogatePair,
    problem: Problem,
    cfg: RunConfig,
    cycle: int = 0,
    pool=None,
) -> list[Individual]:
    """Repaired NSGA-II on predicted objectives for ``cfg.k`` generations.

    The start population is the archive truncated by survival to
    ``cfg.pop_size``, padded with constrained samples when the archive is
    smaller. No exact evaluations are made.
    """
    members = archive.members
    idx = survival_indices(archive.objectives(), [m.cv for m in members], min(cfg.pop_size, len(members)))
    xs = [members[i].x for i in idx]
    if len(xs) < cfg.pop_size:
        taken = set(archive.keys)
        rng = streams.substream(cfg.seed, streams.SURROGATE, cycle)
        for _ in range(50):
            for x in constrained_sampling(cfg.pop_size - len(xs), problem, rng, cfg.repair):
                if grid_key(x) not in taken:
                    taken.add(grid_key(x))
                    xs.append(x)
            if len(xs) >= cfg.pop_size:
                break
    pop = _as_candidates(xs, problem, pair, 0)
    assign_rank_crowding(pop)
    for gen in range(1, cfg.k + 1):
        taken = archive.keys | {grid_key(ind.x) for ind in pop}
        kids = generate_offspring(
            pop, problem, cfg.n_offspring, cfg.variation, cfg.repair, cfg.seed,
            (_SURROGATE_TAG, cycle, gen), taken, pool,
        )  # fmt: skip
        pop = survival(pop + _as_candidates(kids, problem, pair, gen), cfg.pop_size)
    return pop


def roulette_weights(F) -> np.ndarray:
    """Crowding-based weights biased toward boundary points.

    First-front members weigh their crowding distance, with infinite values
    replaced by twice the largest finite one. Members of later fronts weigh
    the smallest finite first-front crowding.
    """
    F = np.asarray(F, dtype=float)
    fronts = non_dominated_sort(F)
    first = fronts[0]
    cd = crowding_distance(F[first])
    finite = cd[np.isfinite(cd)]
    top = 2.0 * finite.max() if finite.size and finite.max() > 0 else 1.0
    low = finite.min() if finite.size else 1.0
    w = np.full(F.shape[0], low)
    w[first] = np.where(np.isfinite(cd), cd, top)
    return w


def select_infill(candidates: Sequence[Individual], n: int, rng: np.random.Generator) -> list[Individual]:
    """One roulette pick per k-means cluster of the normalized predicted objectives."""
    if len(candidates) <= n:
        return list(candidates)
    F = np.array([c.f for c in candidates])
    lo, hi = F.min(axis=0), F.max(axis=0)
    Fn = (F - lo) / np.where(hi > lo, hi - lo, 1.0)
    labels, _ = kmeans(Fn, n, rng)
    w = roulette_weights(Fn)
    picks = []
    for c in range(n):
        members = np.flatnonzero(labels == c)
        if members.size == 0:
            continue
        wc = w[members]
        total = wc.sum()
        p = wc / total if total > 0 else None
        picks.append(candidates[int(rng.choice(members, p=p))])
    return picks


def _stall_fill(problem, cfg, archive, chosen, need, cycle):
    taken = archive.keys | {grid_key(c.x) for c in chosen}
    rng = streams.substream(cfg.seed, streams.STALL, cycle)
    out = []
    for _ in range(50):
        for x in constrained_sampling(need, problem, rng, cfg.repair):
            key = grid_key(x)
            if key not in taken:
                taken.add(key)
                out.append(x)
                if len(out) == need:
                    return out
    return out


def run_sa(
    problem: Problem,
    cfg: RunConfig,
    threads: int = 1,
    budget: EvaluationBudget | None = None,
    run: SARun | None = None,
) -> SARun:
    """Surrogate-assisted run until ``cfg.ese_max`` exact evaluations are spent.

    Pass an empty ``run`` to keep partial results if the run fails.
    """
    budget = EvaluationBudget(cfg.ese_max) if budget is None else budget
    run = SARun(Archive(problem)) if run is None else run
    archive = run.archive
    pool = ThreadPoolExecutor(threads) if threads > 1 else None
    try:
        init = streams.substream(cfg.seed, streams.INIT)
        doe = constrained_sampling(min(cfg.n_doe, budget.remaining), problem, init, cfg.repair)
        for ind in _evaluate(problem, doe, budget, 0, pool):
            archive.add(ind)
        cycle = 0
        while budget.remaining > 0:
            cycle += 1
            row = {"cycle": cycle, "fallback": 0, "injected": 0}
            need = min(cfg.n_infill, budget.remaining)
            pair = None
            if len(archive) >= MIN_SELECTION_POINTS:
                X = np.array([m.x for m in archive.members])
                seed = int(streams.substream(cfg.seed, streams.SELECTION, cycle).integers(2**31))
                try:
                    pair = fit_pair(X, archive.objectives(), rng_seed=seed, pool=pool)
                except FitFailed as exc:
                    log.warning("cycle %d: surrogate fit failed (%s); running one exact generation", cycle, exc)
            if pair is None:
                row["fallback"] = 1
                parents = survival(list(archive.members), min(cfg.pop_size, len(archive)))
                xs = generate_offspring(
                    parents, problem, min(cfg.n_offspring, budget.remaining), cfg.variation, cfg.repair,
                    cfg.seed, (_FALLBACK_TAG, cycle), archive.keys, pool,
                )  # fmt: skip
                predicted = None
            else:
                for m, model in enumerate(pair.models):
                    run.selection.append(
                        {"cycle": cycle, "objective": m + 1, "winner": model.spec.label, **model.report}
                    )
                cands = surrogate_optimize(archive, pair, problem, cfg, cycle, pool)
                cands = eliminate_duplicates(archive.keys, cands)
                chosen = select_infill(cands, need, streams.substream(cfg.seed, streams.INFILL, cycle))
                xs = [c.x for c in chosen]
                predicted = np.array([c.f for c in chosen]).reshape(len(chosen), problem.n_obj)
                if len(xs) < need:
                    extra = _stall_fill(problem, cfg, archive, chosen, need - len(xs), cycle)
                    row["injected"] = len(extra)
                    log.info("cycle %d: infill stalled, injected %d constrained samples", cycle, len(extra))
                    xs = xs + extra
            if not xs:
                log.warning("cycle %d produced no new designs; stopping early", cycle)
                break
            new = _evaluate(problem, xs, budget, cycle, pool)
            for ind in new:
                archive.add(ind)
            row["archive_size"] = len(archive)
            row["infill"] = len(new)
            for m in range(problem.n_obj):
                row[f"winner_f{m + 1}"] = pair.models[m].spec.label if pair else ""
                if predicted is not None and len(predicted):
                    exact = np.array([ind.f[m] for ind in new[: len(predicted)]])
                    row[f"mse_f{m + 1}"] = float(np.mean((predicted[: len(exact), m] - exact) ** 2))
                else:
                    row[f"mse_f{m + 1}"] = float("nan")
            run.cycles.append(row)
    finally:
        if pool is not None:
            pool.shutdown()
    return run
