"""Hypervolume, RHVE traces, feasibility statistics and trade-off ranking."""

from __future__ import annotations

import logging
import warnings
from collections.abc import Sequence
from dataclasses import dataclass

import numpy as np

from machopt import streams
from machopt.problem import Problem
from machopt.sampling import lhs

log = logging.getLogger(__name__)


@dataclass(frozen=True)
class HvReference:
    """Best and worst corners (minimization form) of the normalization box."""

    best: np.ndarray
    worst: np.ndarray

    def __post_init__(self) -> None:
        best = np.asarray(self.best, dtype=float)
        worst = np.asarray(self.worst, dtype=float)
        if best.shape != worst.shape or not np.all(best < worst):
            raise ValueError("best must be strictly better than worst in every objective")
        object.__setattr__(self, "best", best)
        object.__setattr__(self, "worst", worst)

    @classmethod
    def from_fronts(cls, *fronts) -> HvReference:
        """Box spanned by the union of the given objective sets.

        A zero-width objective is widened by one unit so the box stays valid.
        """
        pts = np.vstack([np.asarray(f, dtype=float).reshape(-1, np.shape(f)[-1]) for f in fronts if len(f)])
        best, worst = pts.min(axis=0), pts.max(axis=0)
        worst = np.where(worst > best, worst, best + 1.0)
        return cls(best, worst)

    def normalize(self, F) -> np.ndarray:
        return (np.asarray(F, dtype=float) - self.best) / (self.worst - self.best)


def _sweep(P: np.ndarray) -> float:
    # P: points inside the unit box; reference corner (1, 1).
    P = P[np.lexsort((P[:, 1], P[:, 0]))]
    keep = []
    y_min = np.inf
    for x, y in P:
        if y < y_min:
            keep.append((x, y))
            y_min = y
    area = 0.0
    for (x, y), (x_next, _) in zip(keep, keep[1:] + [(1.0, 0.0)]):
        area += (x_next - x) * (1.0 - y)
    return float(area)


def hypervolume2d(front, ref: HvReference) -> float:
    """Normalized 2-D hypervolume in [0, 1] with reference corner ``ref.worst``.

    Points outside the normalization box are dropped with a warning.
    """
    F = np.asarray(front, dtype=float).reshape(-1, 2)
    if F.shape[0] == 0:
        return 0.0
    P = ref.normalize(F)
    inside = np.all((P >= -1e-12) & (P <= 1.0 + 1e-12), axis=1)
    if not inside.all():
        warnings.warn(f"{int((~inside).sum())} point(s) outside the hypervolume box were dropped", stacklevel=2)
    P = np.clip(P[inside], 0.0, 1.0)
    if P.shape[0] == 0:
        return 0.0
    return _sweep(P)


def rhve(F, feasible, ref: HvReference, stride: int) -> list[tuple[int, float]]:
    """Hypervolume of the feasible prefix after every ``stride`` evaluations.

    The final evaluation count is always included, also when it is not a
    multiple of ``stride``.
    """
    F = np.asarray(F, dtype=float).reshape(-1, 2)
    feasible = np.asarray(feasible, dtype=bool)
    n = F.shape[0]
    if stride < 1:
        raise ValueError("stride must be positive")
    marks = list(range(stride, n + 1, stride))
    if n and (not marks or marks[-1] != n):
        marks.append(n)
    P = np.clip(ref.normalize(F), 0.0, 1.0)
    out = []
    for t in marks:
        sel = P[:t][feasible[:t]]
        out.append((t, _sweep(sel) if len(sel) else 0.0))
    return out


def median_trace(traces: Sequence[Sequence[tuple[int, float]]]) -> list[tuple[int, float]]:
    """Pointwise median of equally sampled traces."""
    counts = [tuple(t for t, _ in tr) for tr in traces]
    if len(set(counts)) != 1:
        raise ValueError("traces must share their evaluation counts")
    values = np.array([[v for _, v in tr] for tr in traces])
    return list(zip(counts[0], np.median(values, axis=0).tolist()))


def tradeoff(F) -> list[tuple[int, float]]:
    """Knee ranking: for each point the worst loss-per-gain against any neighbour.

    Moving from point i to j, the average loss is the mean increase over the
    objectives that get worse and the average gain the mean decrease over
    those that improve. Pairs without gain are skipped; points with no
    valid pair are left out. Returns ``(index, value)`` sorted by value,
    largest first (ties by index).
    """
    F = np.asarray(F, dtype=float)
    n = F.shape[0]
    if n < 2:
        return []
    out = []
    for i in range(n):
        diff = F - F[i]
        worse = diff > 0
        better = diff < 0
        n_loss = worse.sum(axis=1)
        n_gain = better.sum(axis=1)
        valid = n_gain > 0
        valid[i] = False
        if not valid.any():
            continue
        loss = np.where(worse, diff, 0.0).sum(axis=1) / np.maximum(n_loss, 1)
        gain = np.where(better, -diff, 0.0).sum(axis=1) / np.maximum(n_gain, 1)
        out.append((i, float(np.max(loss[valid] / gain[valid]))))
    out.sort(key=lambda t: (-t[1], t[0]))
    return out


@dataclass(frozen=True)
class FeasibilityStats:
    samples: int
    feasible_fraction: float
    batch_fractions: np.ndarray
    violation_fraction: np.ndarray
    rank: np.ndarray


def dense_rank_descending(values) -> np.ndarray:
    """1-based ranks, largest first, equal values sharing a rank."""
    values = np.asarray(values, dtype=float)
    distinct = np.unique(values)[::-1]
    return np.searchsorted(-distinct, -values) + 1


def feasibility_study(problem: Problem, batches: int, batch_size: int, seed: int) -> FeasibilityStats:
    """Feasible fraction and per-constraint violation rates over LHS batches."""
    fracs = np.empty(batches)
    viol = np.zeros(problem.n_constraints)
    for b in range(batches):
        X = lhs(batch_size, problem.bounds, streams.substream(seed, streams.INIT, b), strict_strata=False)
        ok = 0
        for x in X:
            rep = problem.evaluate_constraints(x)
            ok += rep.feasible
            viol += rep.g > 0.0
        fracs[b] = ok / batch_size
    total = batches * batch_size
    vf = viol / total
    return FeasibilityStats(total, float(fracs.mean()), fracs, vf, dense_rank_descending(vf))


def filter_rows(rows: Sequence[dict], rules: Sequence[tuple[str, str, float]]) -> list[dict]:
    """Keep rows satisfying every ``(column, op, threshold)`` rule; op in <, <=, >, >=."""
    ops = {"<": np.less, "<=": np.less_equal, ">": np.greater, ">=": np.greater_equal}
    out = []
    for row in rows:
        if all(ops[op](float(row[col]), thr) for col, op, thr in rules):
            out.append(row)
    return out
