"""Robust (convolutional) autoencoders for anomaly detection, with matrix-decomposition baselines."""

from .baselines import (DecompositionResult, fit_drmf, fit_pca_svd, fit_plain_ae, fit_rpca_convex,
                        fit_rpca_factored)
from .data import LabeledDataset, load_dataset, load_matrix, save_matrix
from .errors import ConfigError, DataError, NumericError, RobustAEError
from .experiment import ExperimentConfig, load_config, run_experiment, run_sweep
from .metrics import auprc, auroc, evaluate, precision_at_k
from .trainer import RobustConfig, RobustModel, score, train_rcae

__version__ = "0.1.0"

__all__ = [
    "ConfigError", "DataError", "DecompositionResult", "ExperimentConfig", "LabeledDataset",
    "NumericError", "RobustAEError", "RobustConfig", "RobustModel", "auprc", "auroc", "evaluate",
    "fit_drmf", "fit_pca_svd", "fit_plain_ae", "fit_rpca_convex", "fit_rpca_factored", "load_config",
    "load_dataset", "load_matrix", "precision_at_k", "run_experiment", "run_sweep", "save_matrix",
    "score", "train_rcae",
]
