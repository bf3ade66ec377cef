"""Granger-causal discovery by Koopman-lifted, lag-sparse autoregression."""
from .baseline import BaselineConfig, LinearVarModel, fit_var
from .datagen import Lorenz96Spec, TimeSeriesData, Var3Spec, generate_lorenz96, generate_var
from .inference import aupr, auroc, evaluate, score_gc, threshold_adjacency
from .loss import PenaltyKind
from .model import LagStack, NkdcdModel
from .optim import DivergedError, TrainConfig, TrainReport, train

__all__ = [
    "BaselineConfig", "DivergedError", "LagStack", "LinearVarModel", "Lorenz96Spec",
    "NkdcdModel", "PenaltyKind", "TimeSeriesData", "TrainConfig", "TrainReport", "Var3Spec",
    "aupr", "auroc", "evaluate", "fit_var", "generate_lorenz96", "generate_var",
    "score_gc", "threshold_adjacency", "train",
]
__version__ = "0.1.0"
