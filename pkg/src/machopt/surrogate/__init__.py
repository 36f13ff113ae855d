"""Per-objective RBF and Kriging metamodels with validation-based selection."""

from machopt.surrogate.base import FitFailed, FittedModel, ModelSpec, candidate_specs, predict
from machopt.surrogate.kriging import fit_kriging
from machopt.surrogate.rbf import fit_rbf
from machopt.surrogate.selection import SurrogatePair, fit_model, fit_pair, select_model

__all__ = [
    "FitFailed",
    "FittedModel",
    "ModelSpec",
    "SurrogatePair",
    "candidate_specs",
    "fit_kriging",
    "fit_model",
    "fit_pair",
    "fit_rbf",
    "predict",
    "select_model",
]
