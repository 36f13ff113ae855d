"""Radial basis function interpolation with optional polynomial tails."""

from __future__ import annotations

import numpy as np

from machopt.surrogate.base import FitFailed, FittedModel, ModelSpec, check_training_set, make_scalers

_RIDGES = (0.0, 1e-10, 1e-8)
RESIDUAL_TOL = 1e-9  # max |interpolation residual| in normalized output units
REFINE_STEPS = 5


def _pairwise(A: np.ndarray, B: np.ndarray) -> np.ndarray:
    diff = A[:, None, :] - B[None, :, :]
    return np.sqrt(np.einsum("ijk,ijk->ij", diff, diff))


def _kernel(name: str, r: np.ndarray, c: float) -> np.ndarray:
    if name == "gaussian":
        return np.exp(-((r / c) ** 2))
    if name == "multiquadric":
        return np.sqrt(r * r + c * c)
    if name == "inverse-multiquadric":
        return 1.0 / np.sqrt(r * r + c * c)
    if name == "cubic":
        return r**3
    # thin-plate: r^2 log r, continuous at 0
    with np.errstate(divide="ignore", invalid="ignore"):
        return np.where(r > 0.0, r * r * np.log(np.where(r > 0.0, r, 1.0)), 0.0)


def _tail(name: str, Z: np.ndarray) -> np.ndarray:
    if name == "none":
        return np.zeros((Z.shape[0], 0))
    ones = np.ones((Z.shape[0], 1))
    return ones if name == "constant" else np.hstack([ones, Z])


def shape_parameter(Z: np.ndarray) -> float:
    """Median pairwise distance (1.0 when degenerate)."""
    n = Z.shape[0]
    iu = np.triu_indices(n, 1)
    med = float(np.median(_pairwise(Z, Z)[iu])) if n > 1 else 0.0
    return med if med > 0.0 else 1.0


def fit_rbf(X, y, spec: ModelSpec) -> FittedModel:
    """Interpolating RBF fit.

    Solves ``[Phi P; P^T 0] [w; a] = [y; 0]``. A singular system is retried
    with a ridge of 1e-10 and then 1e-8 on ``Phi``; any attempt is accepted
    only if it reproduces the training outputs to ``RESIDUAL_TOL``.

    Raises:
        FitFailed: if no attempt interpolates the data.
    """
    if spec.family != "rbf":
        raise ValueError("fit_rbf needs an RBF spec")
    X, y = check_training_set(X, y, 2)
    xs, ys = make_scalers(spec, X, y)
    Z = xs.forward(X)
    t = ys.forward(y)
    c = shape_parameter(Z)
    Phi = _kernel(spec.kernel, _pairwise(Z, Z), c)
    P = _tail(spec.tail, Z)
    n, q = P.shape
    if q > n:
        raise FitFailed(f"{spec.label}: {n} points cannot determine a tail with {q} terms")
    A = np.zeros((n + q, n + q))
    A[:n, :n] = Phi
    A[:n, n:] = P
    A[n:, :n] = P.T
    rhs = np.concatenate([t, np.zeros(q)])
    scale = max(1.0, float(np.abs(Phi).max()))
    tol = RESIDUAL_TOL * max(1.0, float(np.abs(rhs).max()))
    sol = None
    best = np.inf
    for ridge in _RIDGES:
        M = A.copy()
        M[np.arange(n), np.arange(n)] += ridge * scale
        try:
            cand = np.linalg.solve(M, rhs)
        except np.linalg.LinAlgError:
            continue
        # Refine against the unregularized system: the model must interpolate.
        for _ in range(REFINE_STEPS):
            if not np.all(np.isfinite(cand)):
                break
            r = rhs - A @ cand
            if float(np.abs(r).max()) <= tol:
                break
            cand = cand + np.linalg.solve(M, r)
        if not np.all(np.isfinite(cand)):
            continue
        resid = float(np.abs(A @ cand - rhs).max())
        best = min(best, resid)
        if resid <= tol:
            sol = cand
            used = ridge
            break
    if sol is None:
        raise FitFailed(f"{spec.label}: interpolation system is numerically singular (best residual {best:.1e})")
    w, a = sol[:n], sol[n:]
    kernel, tail = spec.kernel, spec.tail

    def predict_norm(Zq):
        return _kernel(kernel, _pairwise(Zq, Z), c) @ w + _tail(tail, Zq) @ a

    return FittedModel(
        spec, X, y, xs, ys, params={"shape": c, "weights": w, "tail": a, "ridge": used}, _predict_norm=predict_norm
    )
