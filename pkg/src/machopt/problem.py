"""Problem abstraction shared by every optimizer in the package.

All objectives are handled in minimization form. Raw objectives that are
maximized (average torque for the IPM machine) are negated when they enter
the optimizer and un-negated only when written to reports.
"""

from __future__ import annotations

import threading
from collections.abc import Callable, Sequence
from dataclasses import dataclass
from enum import Enum

import numpy as np

GRID = 0.01
_GRID_SCALE = 100.0
_GRID_TOL = 1e-7

# Added to |radicand| for constraints that depend on undefined geometry.
DEGENERATE_SENTINEL = 1e6


class BudgetExhausted(RuntimeError):
    """Raised when an exact evaluation is requested with no budget left."""


class Source(str, Enum):
    ESE = "ESE"
    ASE = "ASE"


@dataclass(frozen=True)
class BoundsSpec:
    """Per-variable box bounds."""

    lower: np.ndarray
    upper: np.ndarray

    def __post_init__(self) -> None:
        lower = np.asarray(self.lower, dtype=float)
        upper = np.asarray(self.upper, dtype=float)
        if lower.ndim != 1 or lower.shape != upper.shape:
            raise ValueError("lower and upper must be 1-D vectors of equal length")
        if not np.all(lower < upper):
            raise ValueError("every lower bound must be strictly below its upper bound")
        object.__setattr__(self, "lower", lower)
        object.__setattr__(self, "upper", upper)

    @property
    def dimension(self) -> int:
        return int(self.lower.size)

    @property
    def span(self) -> np.ndarray:
        return self.upper - self.lower

    def contains(self, x: np.ndarray) -> bool:
        x = np.asarray(x, dtype=float)
        return bool(np.all(x >= self.lower) and np.all(x <= self.upper))

    def clip(self, x: np.ndarray) -> np.ndarray:
        return np.clip(x, self.lower, self.upper)


@dataclass(frozen=True)
class ConstraintReport:
    """Constraint values g_j (feasible iff all <= 0) and a degeneracy flag."""

    g: np.ndarray
    degenerate: bool = False

    @property
    def cv(self) -> float:
        return float(np.sum(np.maximum(self.g, 0.0)))

    @property
    def feasible(self) -> bool:
        return (not self.degenerate) and bool(np.all(self.g <= 0.0))


@dataclass
class Individual:
    x: np.ndarray
    g: ConstraintReport
    f: np.ndarray | None = None
    rank: int = -1
    crowding: float = 0.0
    source: Source = Source.ESE
    gen: int = 0

    @property
    def feasible(self) -> bool:
        return self.g.feasible

    @property
    def cv(self) -> float:
        return self.g.cv


class EvaluationBudget:
    """Thread-safe counter of exact solution evaluations."""

    def __init__(self, ese_max: int) -> None:
        if ese_max < 0:
            raise ValueError("ese_max must be non-negative")
        self.ese_max = int(ese_max)
        self._used = 0
        self._lock = threading.Lock()

    @property
    def ese_used(self) -> int:
        return self._used

    @property
    def remaining(self) -> int:
        return self.ese_max - self._used

    def consume(self) -> None:
        with self._lock:
            if self._used >= self.ese_max:
                raise BudgetExhausted(f"ESE budget of {self.ese_max} exhausted")
            self._used += 1


ConstraintFn = Callable[[np.ndarray], tuple[np.ndarray, bool]]
ObjectiveFn = Callable[[np.ndarray], np.ndarray]


@dataclass
class Problem:
    """A box-bounded, constrained multi-objective problem.

    Args:
        name: Registry name.
        bounds: Variable bounds.
        objective_fn: Expensive raw objective evaluator ``x -> raw values``.
        constraint_fn: Inexpensive evaluator ``x -> (g, degenerate)``. ``None``
            means unconstrained.
        maximize: Per raw objective, whether it is maximized.
        constraint_kernel: Optional numba-compiled twin of ``constraint_fn``
            returning ``g`` only, used by the repair hot loop.
        variable_names: Column labels for reports.
        objective_names: Column labels for raw objectives.
    """

    name: str
    bounds: BoundsSpec
    objective_fn: ObjectiveFn
    constraint_fn: ConstraintFn | None
    maximize: tuple[bool, ...]
    constraint_kernel: Callable | None = None
    n_constraints: int = 0
    variable_names: tuple[str, ...] = ()
    objective_names: tuple[str, ...] = ()

    def __post_init__(self) -> None:
        if not self.variable_names:
            self.variable_names = tuple(f"x{i + 1}" for i in range(self.n_var))
        if not self.objective_names:
            self.objective_names = tuple(f"f{i + 1}" for i in range(self.n_obj))

    @property
    def n_var(self) -> int:
        return self.bounds.dimension

    @property
    def n_obj(self) -> int:
        return len(self.maximize)

    def _check_dim(self, x: np.ndarray) -> np.ndarray:
        x = np.asarray(x, dtype=float)
        if x.shape != (self.n_var,):
            raise ValueError(f"expected a vector of length {self.n_var}, got shape {x.shape}")
        return x

    def evaluate_constraints(self, x: np.ndarray) -> ConstraintReport:
        x = self._check_dim(x)
        if self.constraint_fn is None:
            return ConstraintReport(np.zeros(0), False)
        g, degenerate = self.constraint_fn(x)
        return ConstraintReport(np.asarray(g, dtype=float), bool(degenerate))

    def is_feasible(self, x: np.ndarray) -> bool:
        return self.evaluate_constraints(x).feasible

    def to_min(self, raw: np.ndarray) -> np.ndarray:
        raw = np.asarray(raw, dtype=float)
        return np.where(self.maximize, -raw, raw)

    def to_raw(self, f: np.ndarray) -> np.ndarray:
        # Negation is its own inverse.
        return self.to_min(f)

    def evaluate_exact(self, x: np.ndarray, budget: EvaluationBudget) -> np.ndarray:
        """Run the expensive evaluator; returns minimization-form objectives."""
        x = self._check_dim(x)
        budget.consume()
        f = self.to_min(self.objective_fn(x))
        if f.shape != (self.n_obj,) or not np.all(np.isfinite(f)):
            raise ValueError(f"objective evaluator returned invalid values {f!r}")
        return f


def is_dominated(a: Sequence[float], b: Sequence[float]) -> bool:
    """True iff ``b`` Pareto-dominates ``a`` (minimization)."""
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    if a.shape != b.shape:
        raise ValueError("objective vectors must have equal length")
    return bool(np.all(b <= a) and np.any(b < a))


def constrained_dominates(fa, cva: float, fb, cvb: float) -> bool:
    """Feasibility-first domination of ``a`` over ``b``."""
    feas_a, feas_b = cva <= 0.0, cvb <= 0.0
    if feas_a and not feas_b:
        return True
    if feas_b and not feas_a:
        return False
    if not feas_a:
        return cva < cvb
    return is_dominated(fb, fa)


# ---------------------------------------------------------------- grid helpers


def grid_index(x: np.ndarray) -> np.ndarray:
    """Nearest integer grid index of each value (values in units of 0.01)."""
    return np.rint(np.asarray(x, dtype=float) * _GRID_SCALE)


def on_grid(x: np.ndarray) -> bool:
    scaled = np.asarray(x, dtype=float) * _GRID_SCALE
    return bool(np.all(np.abs(scaled - np.rint(scaled)) <= _GRID_TOL))


def from_index(k: np.ndarray) -> np.ndarray:
    """Canonical float for grid indices; equal grid points compare equal."""
    return np.asarray(k, dtype=float) / _GRID_SCALE + 0.0  # no negative zeros


def floor_grid(x: np.ndarray) -> np.ndarray:
    scaled = np.asarray(x, dtype=float) * _GRID_SCALE
    near = np.rint(scaled)
    k = np.where(np.abs(scaled - near) <= _GRID_TOL, near, np.floor(scaled))
    return from_index(k)


def ceil_grid(x: np.ndarray) -> np.ndarray:
    scaled = np.asarray(x, dtype=float) * _GRID_SCALE
    near = np.rint(scaled)
    k = np.where(np.abs(scaled - near) <= _GRID_TOL, near, np.ceil(scaled))
    return from_index(k)


def snap(x: np.ndarray, bounds: BoundsSpec | None = None) -> np.ndarray:
    """Round to the nearest 0.01 with ties toward the lower neighbor."""
    lo = floor_grid(x)
    hi = ceil_grid(x)
    x = np.asarray(x, dtype=float)
    out = np.where(hi - x < x - lo, hi, lo)
    if bounds is not None:
        out = np.clip(out, bounds.lower, bounds.upper)
    return out


def grid_key(x: np.ndarray) -> tuple[int, ...]:
    """Hashable identity of a decision vector on the 0.01 grid."""
    return tuple(int(k) for k in grid_index(x))
