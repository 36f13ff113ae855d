"""NSGA-II building blocks and the generational driver.

The driver supports two modes. ``plain`` snaps offspring to the 0.01 grid
and lets constrained domination sort out infeasible designs. ``wr`` starts
from a feasible design of experiments and passes every offspring through the
two-phase repair operator before it is evaluated.
"""

from __future__ import annotations

import csv
import logging
from collections.abc import Callable, Iterable, Sequence
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from machopt import streams
from machopt.problem import (
    EvaluationBudget,
    Individual,
    Problem,
    Source,
    grid_key,
    snap,
)
from machopt.repair import RepairConfig, RepairFailed, repair
from machopt.sampling import constrained_sampling, lhs

log = logging.getLogger(__name__)


@dataclass(frozen=True)
class VariationConfig:
    """SBX and polynomial mutation settings. ``p_m=None`` means 1/N."""

    p_c: float = 0.9
    eta_c: float = 15.0
    eta_m: float = 20.0
    p_m: float | None = None
    sbx_var_prob: float = 0.5

    def __post_init__(self) -> None:
        if not 0.0 <= self.p_c <= 1.0:
            raise ValueError("p_c must lie in [0, 1]")
        if self.eta_c <= 0 or self.eta_m <= 0:
            raise ValueError("distribution indices must be positive")
        if self.p_m is not None and not 0.0 <= self.p_m <= 1.0:
            raise ValueError("p_m must lie in [0, 1]")
        if not 0.0 <= self.sbx_var_prob <= 1.0:
            raise ValueError("sbx_var_prob must lie in [0, 1]")

    def mutation_prob(self, n_var: int) -> float:
        return 1.0 / n_var if self.p_m is None else self.p_m


# ------------------------------------------------------------------ sorting


def _domination_matrix(F: np.ndarray, cv: np.ndarray) -> np.ndarray:
    """``D[i, j]`` is true when member i constrained-dominates member j."""
    le = np.all(F[:, None, :] <= F[None, :, :], axis=2)
    lt = np.any(F[:, None, :] < F[None, :, :], axis=2)
    pareto = le & lt
    feas = cv <= 0.0
    fi, fj = feas[:, None], feas[None, :]
    by_cv = cv[:, None] < cv[None, :]
    return np.where(fi & fj, pareto, np.where(fi, ~fj, np.where(fj, False, by_cv)))


def non_dominated_sort(F, cv=None) -> list[list[int]]:
    """Fronts of member indices under constrained domination.

    Args:
        F: ``(n, M)`` minimization objectives.
        cv: Per-member total violation; ``None`` treats all as feasible.
    """
    F = np.asarray(F, dtype=float)
    if F.ndim != 2:
        raise ValueError("objectives must be an (n, M) array")
    n = F.shape[0]
    if n == 0:
        return []
    if not np.all(np.isfinite(F)):
        raise ValueError("every member must be evaluated with finite objectives")
    cv = np.zeros(n) if cv is None else np.asarray(cv, dtype=float)
    dom = _domination_matrix(F, cv)
    count = dom.sum(axis=0)
    remaining = np.ones(n, dtype=bool)
    fronts = []
    while remaining.any():
        current = np.flatnonzero(remaining & (count == 0))
        fronts.append(current.tolist())
        remaining[current] = False
        count = count - dom[current].sum(axis=0)
    return fronts


def crowding_distance(F) -> np.ndarray:
    """Range-normalized crowding distance; extremes and fronts of <= 2 get inf."""
    F = np.asarray(F, dtype=float)
    n = F.shape[0]
    if n <= 2:
        return np.full(n, np.inf)
    d = np.zeros(n)
    for m in range(F.shape[1]):
        order = np.argsort(F[:, m], kind="stable")
        f = F[order, m]
        d[order[0]] = d[order[-1]] = np.inf
        span = f[-1] - f[0]
        if span > 0.0:
            d[order[1:-1]] += (f[2:] - f[:-2]) / span
    return d


def assign_rank_crowding(pop: Sequence[Individual]) -> list[list[int]]:
    """Sort ``pop`` in place (rank and crowding attributes); returns the fronts."""
    F = np.array([ind.f for ind in pop])
    cv = np.array([ind.cv for ind in pop])
    fronts = non_dominated_sort(F, cv)
    for r, front in enumerate(fronts):
        cd = crowding_distance(F[front])
        for i, c in zip(front, cd):
            pop[i].rank = r
            pop[i].crowding = float(c)
    return fronts


# ---------------------------------------------------------------- variation


def sbx_crossover(p1, p2, lower, upper, cfg: VariationConfig, rng: np.random.Generator):
    """Bounded simulated binary crossover; returns two children."""
    p1 = np.asarray(p1, dtype=float)
    p2 = np.asarray(p2, dtype=float)
    c1, c2 = p1.copy(), p2.copy()
    if rng.random() > cfg.p_c:
        return c1, c2
    eta = cfg.eta_c
    for i in range(p1.size):
        if rng.random() > cfg.sbx_var_prob or abs(p1[i] - p2[i]) <= 1e-14:
            continue
        y1, y2 = min(p1[i], p2[i]), max(p1[i], p2[i])
        yl, yu = lower[i], upper[i]
        u = rng.random()

        def spread(beta):
            alpha = 2.0 - beta ** -(eta + 1.0)
            if u <= 1.0 / alpha:
                return (u * alpha) ** (1.0 / (eta + 1.0))
            return (1.0 / (2.0 - u * alpha)) ** (1.0 / (eta + 1.0))

        diff = y2 - y1
        a = y1 + y2
        b1 = spread(1.0 + 2.0 * (y1 - yl) / diff)
        b2 = spread(1.0 + 2.0 * (yu - y2) / diff)
        lo_child = min(max(0.5 * (a - b1 * diff), yl), yu)
        hi_child = min(max(0.5 * (a + b2 * diff), yl), yu)
        if rng.random() <= 0.5:
            lo_child, hi_child = hi_child, lo_child
        c1[i], c2[i] = lo_child, hi_child
    return c1, c2


def polynomial_mutation(x, lower, upper, cfg: VariationConfig, rng: np.random.Generator) -> np.ndarray:
    """Bounded polynomial mutation; each variable mutates with probability p_m."""
    y = np.array(x, dtype=float)
    p_m = cfg.mutation_prob(y.size)
    eta = cfg.eta_m
    power = 1.0 / (eta + 1.0)
    for i in range(y.size):
        if rng.random() >= p_m:
            continue
        yl, yu = lower[i], upper[i]
        span = yu - yl
        d1 = (y[i] - yl) / span
        d2 = (yu - y[i]) / span
        u = rng.random()
        if u < 0.5:
            val = 2.0 * u + (1.0 - 2.0 * u) * (1.0 - d1) ** (eta + 1.0)
            dq = val**power - 1.0
        else:
            val = 2.0 * (1.0 - u) + 2.0 * (u - 0.5) * (1.0 - d2) ** (eta + 1.0)
            dq = 1.0 - val**power
        y[i] = min(max(y[i] + dq * span, yl), yu)
    return y


# ---------------------------------------------------------------- selection


def _tournament_index(rank: np.ndarray, crowd: np.ndarray, rng: np.random.Generator) -> int:
    n = rank.size
    if n == 0:
        raise ValueError("cannot select from an empty population")
    if n == 1:
        return 0
    a, b = rng.choice(n, size=2, replace=False)
    if rank[a] != rank[b]:
        return int(a if rank[a] < rank[b] else b)
    if crowd[a] != crowd[b]:
        return int(a if crowd[a] > crowd[b] else b)
    return int(a if rng.random() < 0.5 else b)


def tournament_select(pop: Sequence[Individual], rng: np.random.Generator) -> Individual:
    """Binary tournament: lower rank, then larger crowding, then a fair coin."""
    rank = np.array([ind.rank for ind in pop])
    crowd = np.array([ind.crowding for ind in pop])
    return pop[_tournament_index(rank, crowd, rng)]


def survival_indices(F, cv, target: int) -> list[int]:
    """Indices (ascending) of the ``target`` survivors of a combined population."""
    F = np.asarray(F, dtype=float)
    n = F.shape[0]
    if target > n:
        raise ValueError("combined population is smaller than the target size")
    keep: list[int] = []
    for front in non_dominated_sort(F, cv):
        if len(keep) + len(front) <= target:
            keep.extend(front)
            if len(keep) == target:
                break
            continue
        cd = crowding_distance(F[front])
        order = sorted(range(len(front)), key=lambda t: (-cd[t], front[t]))
        keep.extend(front[t] for t in order[: target - len(keep)])
        break
    return sorted(keep)


def survival(pop: Sequence[Individual], target: int) -> list[Individual]:
    """Elitist truncation: whole fronts, then the least crowded of the split front.

    Survivors keep their input order and carry rank/crowding recomputed over
    the surviving population.
    """
    F = np.array([ind.f for ind in pop])
    cv = np.array([ind.cv for ind in pop])
    chosen = [pop[i] for i in survival_indices(F, cv, target)]
    assign_rank_crowding(chosen)
    return chosen


def eliminate_duplicates(existing: Iterable, candidates: Sequence[Individual]) -> list[Individual]:
    """Drop candidates already in ``existing`` or repeated earlier in ``candidates``.

    ``existing`` holds decision vectors or grid keys.
    """
    seen = {k if isinstance(k, tuple) else grid_key(k) for k in existing}
    out = []
    for ind in candidates:
        key = grid_key(ind.x)
        if key in seen:
            continue
        seen.add(key)
        out.append(ind)
    return out


# ------------------------------------------------------------------ archive


@dataclass
class Archive:
    """Every exactly evaluated individual, in evaluation order."""

    problem: Problem
    members: list[Individual] = field(default_factory=list)
    _keys: set = field(default_factory=set, repr=False)

    def __len__(self) -> int:
        return len(self.members)

    def __contains__(self, x) -> bool:
        return grid_key(x) in self._keys

    @property
    def keys(self) -> set:
        return self._keys

    def add(self, ind: Individual) -> None:
        key = grid_key(ind.x)
        if key in self._keys:
            raise ValueError(f"duplicate decision vector {ind.x.tolist()}")
        self._keys.add(key)
        self.members.append(ind)

    def objectives(self) -> np.ndarray:
        return np.array([ind.f for ind in self.members]).reshape(len(self), self.problem.n_obj)

    def feasible_mask(self) -> np.ndarray:
        return np.array([ind.feasible for ind in self.members], dtype=bool)

    @property
    def feasible_count(self) -> int:
        return int(self.feasible_mask().sum())

    def pareto_front(self) -> list[Individual]:
        """Feasible non-dominated members, in evaluation order."""
        feas = [ind for ind in self.members if ind.feasible]
        if not feas:
            return []
        fronts = non_dominated_sort(np.array([ind.f for ind in feas]))
        return [feas[i] for i in sorted(fronts[0])]

    def ranks(self) -> np.ndarray:
        if not self.members:
            return np.zeros(0, dtype=int)
        cv = np.array([ind.cv for ind in self.members])
        rank = np.empty(len(self), dtype=int)
        for r, front in enumerate(non_dominated_sort(self.objectives(), cv)):
            rank[front] = r
        return rank

    def write_csv(self, path, header_lines: Sequence[str] = ()) -> None:
        write_individuals_csv(path, self.problem, self.members, header_lines, self.ranks())


def csv_columns(problem: Problem) -> list[str]:
    return (
        ["gen", "eval_index"]
        + [f"x{i + 1}" for i in range(problem.n_var)]
        + [f"f{m + 1}_raw" for m in range(problem.n_obj)]
        + [f"g{j + 1}" for j in range(problem.n_constraints)]
        + ["feasible", "rank"]
    )


def write_individuals_csv(path, problem: Problem, members, header_lines=(), ranks=None) -> None:
    """CSV with optional ``#`` comment lines before the header row."""
    if ranks is None:
        cv = np.array([ind.cv for ind in members])
        F = np.array([ind.f for ind in members]).reshape(len(members), problem.n_obj)
        ranks = np.empty(len(members), dtype=int)
        for r, front in enumerate(non_dominated_sort(F, cv)):
            ranks[front] = r
    with open(path, "w", newline="") as fh:
        for line in header_lines:
            fh.write(f"# {line}\n")
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(csv_columns(problem))
        for i, ind in enumerate(members):
            raw = problem.to_raw(ind.f)
            g = ind.g.g if ind.g.g.size else np.zeros(0)
            w.writerow(
                [ind.gen, i]
                + [f"{v:.2f}" for v in ind.x]
                + [repr(float(v)) for v in raw]
                + [repr(float(v)) for v in g]
                + [int(ind.feasible), int(ranks[i])]
            )


# ------------------------------------------------------------------- driver


@dataclass
class RunHooks:
    """Optional callbacks observed by the driver."""

    on_generation: Callable[[int, Archive], None] | None = None


def _evaluate(problem: Problem, xs: Sequence[np.ndarray], budget: EvaluationBudget, gen: int, pool) -> list[Individual]:
    xs = list(xs)[: budget.remaining]

    def work(x):
        f = problem.evaluate_exact(x, budget)
        return Individual(x=x, g=problem.evaluate_constraints(x), f=f, source=Source.ESE, gen=gen)

    if pool is None:
        return [work(x) for x in xs]
    return list(pool.map(work, xs))


def _repair_batch(xs, problem, rcfg, seed, key, pool):
    """Repair each candidate on its own substream; failures are resampled."""

    def work(item):
        idx, x = item
        rng = streams.substream(seed, streams.REPAIR, *key, idx)
        try:
            return repair(x, problem, rcfg, rng)
        except RepairFailed:
            fallback = streams.substream(seed, streams.FALLBACK, *key, idx)
            return constrained_sampling(1, problem, fallback, rcfg)[0]

    items = list(enumerate(xs))
    if pool is None:
        return [work(it) for it in items]
    return list(pool.map(work, items))


def make_offspring(parents: Sequence[Individual], problem: Problem, n: int, vcfg: VariationConfig, rng) -> list[np.ndarray]:
    """``n`` children from tournament-selected pairs, clipped to bounds."""
    lo, hi = problem.bounds.lower, problem.bounds.upper
    rank = np.array([ind.rank for ind in parents])
    crowd = np.array([ind.crowding for ind in parents])
    kids: list[np.ndarray] = []
    while len(kids) < n:
        a = parents[_tournament_index(rank, crowd, rng)].x
        b = parents[_tournament_index(rank, crowd, rng)].x
        for c in sbx_crossover(a, b, lo, hi, vcfg, rng):
            kids.append(polynomial_mutation(c, lo, hi, vcfg, rng))
    return kids[:n]


def generate_offspring(
    parents: Sequence[Individual],
    problem: Problem,
    n: int,
    vcfg: VariationConfig,
    rcfg: RepairConfig | None,
    seed: int,
    key: tuple[int, ...],
    taken: set,
    pool=None,
    max_rounds: int = 20,
) -> list[np.ndarray]:
    """Up to ``n`` new on-grid designs not in ``taken`` (repaired when ``rcfg``).

    ``key`` identifies the generation in the seeded substream tree.
    """
    out: list[np.ndarray] = []
    seen = set(taken)
    for rnd in range(max_rounds):
        rng = streams.substream(seed, streams.VARIATION, *key, rnd)
        kids = make_offspring(parents, problem, n, vcfg, rng)
        if rcfg is None:
            kids = [snap(k, problem.bounds) for k in kids]
        else:
            kids = _repair_batch(kids, problem, rcfg, seed, (*key, rnd), pool)
        for k in kids:
            gk = grid_key(k)
            if gk in seen:
                continue
            seen.add(gk)
            out.append(k)
            if len(out) == n:
                return out
    log.warning("generation %s: only %d unique offspring after %d rounds", key, len(out), max_rounds)
    return out


def nsga2_run(
    problem: Problem,
    cfg,
    repair_cfg: RepairConfig | None = None,
    budget: EvaluationBudget | None = None,
    threads: int = 1,
    hooks: RunHooks | None = None,
    archive: Archive | None = None,
) -> Archive:
    """Steady-state NSGA-II until the exact-evaluation budget is spent.

    Args:
        problem: Problem to optimize.
        cfg: A :class:`machopt.config.RunConfig`.
        repair_cfg: Attach the repair operator (``wr`` mode) when given; the
            initial population is then feasible by construction.
        budget: Defaults to a fresh budget of ``cfg.ese_max``.
        threads: Worker threads for repair and evaluation. Results do not
            depend on this value.
        archive: Empty archive to fill; lets callers keep partial results
            when the run fails.
    """
    budget = EvaluationBudget(cfg.ese_max) if budget is None else budget
    archive = Archive(problem) if archive is None else archive
    pool = ThreadPoolExecutor(threads) if threads > 1 else None
    try:
        init_rng = streams.substream(cfg.seed, streams.INIT)
        n0 = min(cfg.pop_size, budget.remaining)
        if repair_cfg is None:
            xs = lhs(n0, problem.bounds, init_rng, strict_strata=False)
            xs = [ind.x for ind in eliminate_duplicates((), [Individual(x, None) for x in xs])]
        else:
            xs = list(constrained_sampling(n0, problem, init_rng, repair_cfg))
        pop = _evaluate(problem, xs, budget, 0, pool)
        for ind in pop:
            archive.add(ind)
        assign_rank_crowding(pop)
        gen = 0
        while budget.remaining > 0:
            gen += 1
            n_kids = min(cfg.n_offspring, budget.remaining)
            kids = generate_offspring(
                pop, problem, n_kids, cfg.variation, repair_cfg, cfg.seed, (0, gen), archive.keys, pool
            )
            if not kids:
                log.warning("generation %d produced no new designs; stopping", gen)
                break
            new = _evaluate(problem, kids, budget, gen, pool)
            for ind in new:
                archive.add(ind)
            pop = survival(pop + new, cfg.pop_size)
            if hooks and hooks.on_generation:
                hooks.on_generation(gen, archive)
    finally:
        if pool is not None:
            pool.shutdown()
    return archive
