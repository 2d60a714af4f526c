"""ChainsFormer: numerical reasoning over knowledge graphs with relation-attribute chains"""

from __future__ import annotations

from .config import build_config, load_config, setup_logging, train_config
from .coordinator import TrainingCoordinator, TrainingData, fit, load_model, load_run_dataset

__all__ = [
    "TrainingCoordinator",
    "TrainingData",
    "build_config",
    "fit",
    "load_config",
    "load_model",
    "load_run_dataset",
    "setup_logging",
    "train_config",
]
