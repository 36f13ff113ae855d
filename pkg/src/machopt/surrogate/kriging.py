"""Ordinary Kriging with anisotropic length scales.

Length scales are found by maximizing the concentrated log-likelihood with
the package's bounded Nelder-Mead engine, from several starts. The
likelihood is compiled so the whole search runs without the interpreter.
"""

from __future__ import annotations

import numba
import numpy as np
from numba.extending import register_jitable

from machopt.simplex import nelder_mead
from machopt.surrogate.base import FitFailed, FittedModel, ModelSpec, check_training_set, make_scalers

# log10 length-scale search box in (unit-cube) input units
LOG_ELL_MIN = -2.0
LOG_ELL_MAX = 1.0
NUGGET = 1e-10
NUGGET_MAX = 1e-4
XTOL = 1e-8
FTOL = 1e-14
_FAIL = 1e10
RESIDUAL_TOL = 1e-9  # training residual in standardized output units
REFINE_STEPS = 3
_POWER = {"gaussian": 2, "exponential": 1}


@register_jitable
def _correlation(Z1, Z2, ell, power):
    n1, n2, d = Z1.shape[0], Z2.shape[0], Z1.shape[1]
    R = np.empty((n1, n2))
    for i in range(n1):
        for j in range(n2):
            s = 0.0
            for k in range(d):
                t = abs(Z1[i, k] - Z2[j, k]) / ell[k]
                s += 0.5 * t * t if power == 2 else t
            R[i, j] = np.exp(-s)
    return R


@register_jitable
def _solve_chol(L, b):
    n = L.shape[0]
    z = np.empty(n)
    for i in range(n):
        s = b[i]
        for k in range(i):
            s -= L[i, k] * z[k]
        z[i] = s / L[i, i]
    x = np.empty(n)
    for i in range(n - 1, -1, -1):
        s = z[i]
        for k in range(i + 1, n):
            s -= L[k, i] * x[k]
        x[i] = s / L[i, i]
    return x


_correlation_jit = numba.njit(cache=True)(_correlation)
_solve_chol_jit = numba.njit(cache=True)(_solve_chol)


@register_jitable
def _unpack(params):
    n = int(params[0])
    d = int(params[1])
    power = int(params[2])
    nugget = params[3]
    Z = params[4 : 4 + n * d].copy().reshape((n, d))
    y = params[4 + n * d : 4 + n * d + n]
    return n, d, power, nugget, Z, y


@numba.njit(nogil=True, cache=True)
def neg_concentrated_loglik(log_ell, params):
    """-ln L up to constants: (n/2) ln sigma^2 + (1/2) ln det R."""
    n, d, power, nugget, Z, y = _unpack(params)
    ell = 10.0**log_ell
    R = _correlation(Z, Z, ell, power)
    for i in range(n):
        R[i, i] += nugget
    try:
        L = np.linalg.cholesky(R)
    except Exception:
        return 1e10
    ones = np.ones(n)
    ri_1 = _solve_chol(L, ones)
    ri_y = _solve_chol(L, y)
    mu = np.sum(ri_y) / np.sum(ri_1)
    r = y - mu
    sigma2 = np.dot(r, _solve_chol(L, r)) / n
    if not sigma2 > 0.0:
        return 1e10
    logdet = 0.0
    for i in range(n):
        logdet += 2.0 * np.log(L[i, i])
    return 0.5 * n * np.log(sigma2) + 0.5 * logdet


def _pack(Z, t, power, nugget) -> np.ndarray:
    n, d = Z.shape
    return np.concatenate([[n, d, power, nugget], Z.ravel(), t])


def _starts(d: int, n_starts: int, rng: np.random.Generator) -> list[np.ndarray]:
    starts = [np.full(d, np.log10(0.5))]
    for _ in range(n_starts - 1):
        starts.append(rng.uniform(LOG_ELL_MIN, LOG_ELL_MAX, d))
    return starts


def fit_kriging(
    X, y, spec: ModelSpec, rng_seed: int = 0, n_starts: int = 3, max_iter: int = 300
) -> FittedModel:
    """Fit an ordinary Kriging model.

    Args:
        n_starts: Likelihood searches; the first starts at length scale 0.5
            in every direction, the rest at seeded random points.
        max_iter: Simplex iteration cap per start.

    Raises:
        FitFailed: when the correlation matrix stays too ill-conditioned
            to reproduce the training outputs with a nugget of 1e-4.
    """
    if spec.family != "kriging":
        raise ValueError("fit_kriging needs a Kriging spec")
    X, y = check_training_set(X, y, 3)
    # Canonical row order: the search path, hence the fit, ignores input order.
    order = np.lexsort(X.T[::-1])
    X, y = X[order], y[order]
    xs, ys = make_scalers(spec, X, y)
    Z = xs.forward(X)
    t = ys.forward(y)
    n, d = Z.shape
    power = _POWER[spec.kernel]
    rng = np.random.default_rng(rng_seed)
    lo, hi = np.full(d, LOG_ELL_MIN), np.full(d, LOG_ELL_MAX)

    constant = bool(np.all(t == t[0]))
    nugget = NUGGET
    while nugget <= NUGGET_MAX * (1 + 1e-9):
        if constant:
            log_ell = np.zeros(d)
        else:
            params = _pack(Z, t, power, nugget)
            best = None
            for x0 in _starts(d, n_starts, rng):
                res = nelder_mead(
                    neg_concentrated_loglik, x0, params=params, step=0.5, lower=lo, upper=hi,
                    max_iter=max_iter, xtol=XTOL, ftol=FTOL,
                )  # fmt: skip
                if best is None or res.fun < best.fun:
                    best = res
            log_ell = best.x if best.fun < _FAIL else None
        if log_ell is not None:
            model = _assemble(spec, X, y, xs, ys, Z, t, 10.0**log_ell, power, nugget)
            if model is not None:
                return model
        nugget *= 10.0
    raise FitFailed(f"{spec.label}: correlation matrix ill-conditioned up to nugget {NUGGET_MAX:g}")


def _assemble(spec, X, y, xs, ys, Z, t, ell, power, nugget):
    n = Z.shape[0]
    R = _correlation_jit(Z, Z, ell, power) + nugget * np.eye(n)
    try:
        L = np.linalg.cholesky(R)
    except np.linalg.LinAlgError:
        return None
    ri_1 = _solve_chol_jit(L, np.ones(n))
    mu = float(np.sum(_solve_chol_jit(L, t)) / np.sum(ri_1))
    resid = t - mu
    alpha = _solve_chol_jit(L, resid)
    for _ in range(REFINE_STEPS):
        if not np.all(np.isfinite(alpha)):
            return None
        r = resid - R @ alpha
        if float(np.abs(r).max()) <= RESIDUAL_TOL:
            break
        alpha = alpha + _solve_chol_jit(L, r)
    # Too ill-conditioned to reproduce the data: the caller raises the nugget.
    if not np.all(np.isfinite(alpha)) or float(np.abs(resid - R @ alpha).max()) > RESIDUAL_TOL:
        return None
    sigma2 = float(resid @ alpha / n)

    def predict_norm(Zq):
        Zq = np.ascontiguousarray(Zq, dtype=float)
        r = _correlation_jit(Zq, Z, ell, power)
        # The nugget belongs to the zero-lag correlation, so training inputs
        # reproduce their outputs.
        r[_coincident(Zq, Z)] += nugget
        return mu + r @ alpha

    return FittedModel(
        spec, X, y, xs, ys,
        params={"length_scales": ell, "mu": mu, "sigma2": max(sigma2, 0.0), "nugget": nugget},
        _predict_norm=predict_norm,
    )  # fmt: skip


def _coincident(A: np.ndarray, B: np.ndarray) -> np.ndarray:
    return np.all(A[:, None, :] == B[None, :, :], axis=2)

