"""Model specifications, normalization and the fitted-model container."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

RBF_KERNELS = ("gaussian", "multiquadric", "inverse-multiquadric", "cubic", "thin-plate")
KRIGING_KERNELS = ("gaussian", "exponential")
INPUT_NORMS = ("none", "unit-cube")
OUTPUT_NORMS = ("none", "standardize")
TAILS = ("none", "constant", "linear")


class FitFailed(RuntimeError):
    """A metamodel could not be fitted (singular or ill-conditioned system)."""


@dataclass(frozen=True)
class ModelSpec:
    family: str
    kernel: str
    input_norm: str = "unit-cube"
    output_norm: str = "standardize"
    tail: str = "none"

    def __post_init__(self) -> None:
        kernels = {"rbf": RBF_KERNELS, "kriging": KRIGING_KERNELS}.get(self.family)
        if kernels is None:
            raise ValueError(f"unknown family {self.family!r}")
        if self.kernel not in kernels:
            raise ValueError(f"kernel {self.kernel!r} is not valid for {self.family}")
        if self.input_norm not in INPUT_NORMS or self.output_norm not in OUTPUT_NORMS:
            raise ValueError("unknown normalization")
        if self.tail not in TAILS:
            raise ValueError(f"unknown tail {self.tail!r}")
        if self.family == "kriging" and self.tail != "constant":
            raise ValueError("ordinary kriging uses a constant mean (tail='constant')")

    @property
    def label(self) -> str:
        return f"{self.family}:{self.kernel}/{self.input_norm}/{self.output_norm}/{self.tail}"

    @classmethod
    def parse(cls, label: str) -> ModelSpec:
        family, rest = label.split(":", 1)
        kernel, inorm, onorm, tail = rest.split("/")
        return cls(family, kernel, inorm, onorm, tail)


def candidate_specs() -> list[ModelSpec]:
    """The 22 candidate specs searched during model selection.

    RBF kernels are paired only with tails that make their interpolation
    system uniquely solvable: the multiquadric needs at least a constant
    tail, cubic and thin-plate splines a linear one. Each RBF pairing is
    tried with and without unit-cube input scaling. The two Kriging kernels
    always use unit-cube inputs, where the length-scale search box is
    defined. Outputs are standardized throughout so conditioning does not
    depend on the objective's units.
    """
    pairs = [
        ("gaussian", "none"), ("gaussian", "constant"), ("gaussian", "linear"),
        ("inverse-multiquadric", "none"), ("inverse-multiquadric", "constant"),
        ("inverse-multiquadric", "linear"),
        ("multiquadric", "constant"), ("multiquadric", "linear"),
        ("cubic", "linear"), ("thin-plate", "linear"),
    ]  # fmt: skip
    specs = [ModelSpec("rbf", k, norm, "standardize", t) for norm in INPUT_NORMS for k, t in pairs]
    specs += [ModelSpec("kriging", k, "unit-cube", "standardize", "constant") for k in KRIGING_KERNELS]
    return specs


@dataclass(frozen=True)
class Scaler:
    """Affine map ``(v - shift) / scale`` applied column-wise."""

    shift: np.ndarray
    scale: np.ndarray

    @classmethod
    def identity(cls, dim: int) -> Scaler:
        return cls(np.zeros(dim), np.ones(dim))

    @classmethod
    def unit_cube(cls, X: np.ndarray) -> Scaler:
        lo, hi = X.min(axis=0), X.max(axis=0)
        span = np.where(hi > lo, hi - lo, 1.0)
        return cls(lo, span)

    @classmethod
    def standard(cls, y: np.ndarray) -> Scaler:
        sd = y.std()
        return cls(np.array([y.mean()]), np.array([sd if sd > 0 else 1.0]))

    def forward(self, v):
        return (v - self.shift) / self.scale

    def inverse(self, v):
        return v * self.scale + self.shift


def make_scalers(spec: ModelSpec, X: np.ndarray, y: np.ndarray) -> tuple[Scaler, Scaler]:
    xs = Scaler.unit_cube(X) if spec.input_norm == "unit-cube" else Scaler.identity(X.shape[1])
    ys = Scaler.standard(y) if spec.output_norm == "standardize" else Scaler.identity(1)
    return xs, ys


@dataclass
class FittedModel:
    """An immutable fitted metamodel; call :meth:`predict` with one or many points."""

    spec: ModelSpec
    X: np.ndarray
    y: np.ndarray
    x_scaler: Scaler
    y_scaler: Scaler
    params: dict = field(default_factory=dict)
    validation_mse: float = float("nan")
    report: dict = field(default_factory=dict)
    _predict_norm: object = field(default=None, repr=False)

    def predict(self, x) -> np.ndarray | float:
        x = np.asarray(x, dtype=float)
        single = x.ndim == 1
        Z = self.x_scaler.forward(np.atleast_2d(x))
        out = self.y_scaler.inverse(self._predict_norm(Z))
        return float(out[0]) if single else out


def predict(model: FittedModel, x) -> np.ndarray | float:
    return model.predict(x)


def check_training_set(X, y, minimum: int) -> tuple[np.ndarray, np.ndarray]:
    X = np.asarray(X, dtype=float)
    y = np.asarray(y, dtype=float).ravel()
    if X.ndim != 2 or X.shape[0] != y.size:
        raise ValueError("X must be (n, d) with one output per row")
    if X.shape[0] < minimum:
        raise ValueError(f"at least {minimum} training points are required, got {X.shape[0]}")
    if len(np.unique(X, axis=0)) != X.shape[0]:
        raise ValueError("training inputs must be distinct")
    return X, y
