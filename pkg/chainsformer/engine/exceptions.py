"""Exceptions for the ChainsFormer engine"""

from __future__ import annotations


class ChainsFormerError(Exception):
    """Generic ChainsFormer exception"""


class DatasetFormatError(ChainsFormerError):
    """Malformed row in a triples file"""

    def __init__(self, path: str, line: int, reason: str) -> None:
        super().__init__(f"{path}:{line}: {reason}")
        self.path = path
        self.line = line
        self.reason = reason


class UnknownIdentifierError(ChainsFormerError):
    """Entity, relation or attribute not interned in the graph"""


class DegenerateAttributeError(ChainsFormerError):
    """Attribute without a usable min-max range"""


class GeometryError(ChainsFormerError):
    """Dimension/curvature mismatch or a point outside the ball"""


class ShapeError(ChainsFormerError):
    """Operands of a tensor op have incompatible shapes"""


class NonFiniteError(ChainsFormerError):
    """NaN or infinity where a finite value is required"""


class RetrievalLimitError(ChainsFormerError):
    """Exhaustive chain enumeration exceeded its path guard"""


class TrainingFault(ChainsFormerError):
    """Training aborted, e.g. on a non-finite loss"""


class ConfigError(ChainsFormerError):
    """Invalid run configuration"""


class CheckpointError(ChainsFormerError):
    """Checkpoint file missing, unreadable or of an unknown version"""
