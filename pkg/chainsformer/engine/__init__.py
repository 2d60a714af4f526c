"""Chain-based numerical reasoning over knowledge graphs"""

from .checkpoint import Checkpoint
from .exceptions import (
    ChainsFormerError,
    CheckpointError,
    ConfigError,
    DatasetFormatError,
    DegenerateAttributeError,
    GeometryError,
    NonFiniteError,
    RetrievalLimitError,
    ShapeError,
    TrainingFault,
    UnknownIdentifierError,
)
from .graph import AttributeStats, DatasetSplit, KnowledgeGraph, Query, load_dataset
from .model import ChainsFormer, TrainConfig

__all__ = [
    "AttributeStats",
    "ChainsFormer",
    "ChainsFormerError",
    "Checkpoint",
    "CheckpointError",
    "ConfigError",
    "DatasetFormatError",
    "DatasetSplit",
    "DegenerateAttributeError",
    "GeometryError",
    "KnowledgeGraph",
    "NonFiniteError",
    "Query",
    "RetrievalLimitError",
    "ShapeError",
    "TrainConfig",
    "TrainingFault",
    "UnknownIdentifierError",
    "load_dataset",
]
