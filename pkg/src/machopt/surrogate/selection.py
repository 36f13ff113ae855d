"""Validation-based choice among candidate metamodels, one model per objective."""

from __future__ import annotations

from collections.abc import Sequence
from concurrent.futures import Executor
from dataclasses import dataclass

import numpy as np

from machopt.surrogate.base import FitFailed, FittedModel, ModelSpec, candidate_specs
from machopt.surrogate.kriging import fit_kriging
from machopt.surrogate.rbf import fit_rbf

MIN_SELECTION_POINTS = 10


def fit_model(X, y, spec: ModelSpec, rng_seed: int = 0) -> FittedModel:
    if spec.family == "rbf":
        return fit_rbf(X, y, spec)
    return fit_kriging(X, y, spec, rng_seed=rng_seed)


def _score(args):
    Xt, yt, Xv, yv, spec, seed = args
    try:
        model = fit_model(Xt, yt, spec, seed)
    except FitFailed:
        return float("inf")
    pred = model.predict(Xv)
    mse = float(np.mean((pred - yv) ** 2))
    return mse if np.isfinite(mse) else float("inf")


def select_model(
    X,
    y,
    specs: Sequence[ModelSpec] | None = None,
    rng_seed: int = 0,
    pool: Executor | None = None,
) -> FittedModel:
    """Pick the candidate with the lowest validation MSE and refit it on all data.

    One seeded 80/20 split is used. Ties go to the earlier spec. If the
    winner cannot be refitted on the full set, the next-best candidate is
    tried.

    Raises:
        ValueError: fewer than 10 points.
        FitFailed: when no candidate can be fitted.
    """
    X = np.asarray(X, dtype=float)
    y = np.asarray(y, dtype=float).ravel()
    if X.shape[0] < MIN_SELECTION_POINTS:
        raise ValueError(f"model selection needs at least {MIN_SELECTION_POINTS} points, got {X.shape[0]}")
    specs = list(candidate_specs() if specs is None else specs)
    rng = np.random.default_rng(rng_seed)
    n = X.shape[0]
    perm = rng.permutation(n)
    n_val = max(1, int(round(0.2 * n)))
    val, train = np.sort(perm[:n_val]), np.sort(perm[n_val:])
    jobs = [(X[train], y[train], X[val], y[val], s, rng_seed) for s in specs]
    scores = list(pool.map(_score, jobs)) if pool is not None else [_score(j) for j in jobs]
    if not np.isfinite(scores).any():
        raise FitFailed("every candidate metamodel failed to fit")
    order = sorted(range(len(specs)), key=lambda i: (scores[i], i))
    report = {specs[i].label: scores[i] for i in range(len(specs))}
    for i in order:
        if not np.isfinite(scores[i]):
            break
        try:
            model = fit_model(X, y, specs[i], rng_seed)
        except FitFailed:
            continue
        model.validation_mse = scores[i]
        model.report = report
        return model
    raise FitFailed("no candidate metamodel could be refitted on the full data")


@dataclass
class SurrogatePair:
    """Independent per-objective models trained on one input set."""

    models: tuple[FittedModel, ...]

    def predict(self, X) -> np.ndarray:
        X = np.atleast_2d(np.asarray(X, dtype=float))
        return np.column_stack([m.predict(X) for m in self.models])


def fit_pair(X, F, specs=None, rng_seed: int = 0, pool: Executor | None = None) -> SurrogatePair:
    F = np.asarray(F, dtype=float)
    return SurrogatePair(
        tuple(select_model(X, F[:, m], specs, rng_seed + m, pool) for m in range(F.shape[1]))
    )
