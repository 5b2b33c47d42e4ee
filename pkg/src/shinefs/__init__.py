"""Multi-view unsupervised feature selection via structure-aware hybrid-order similarity learning."""

from ._backend import BACKEND
from .data import SynthSpec, load_multiview, save_multiview, synth_generate, zscore
from .model import (
    EvalReport,
    FitError,
    HyperParams,
    KSparseRowGraph,
    ModelState,
    MultiViewDataset,
    NumericalError,
    ValidationError,
    validate,
)
from .optimizer import FitResult, fit, objective, select_features

__all__ = [
    "BACKEND",
    "EvalReport",
    "FitError",
    "FitResult",
    "HyperParams",
    "KSparseRowGraph",
    "ModelState",
    "MultiViewDataset",
    "NumericalError",
    "SynthSpec",
    "ValidationError",
    "fit",
    "load_multiview",
    "objective",
    "save_multiview",
    "select_features",
    "synth_generate",
    "validate",
    "zscore",
]
