"""Record models for everything ChainsFormer writes to disk"""

from __future__ import annotations

from typing import Any, Dict, List, Optional

from pydantic import BaseModel, Extra, Field


class AttributeStat(BaseModel):
    """Object holding min-max statistics of one attribute on the training split"""

    attribute: str
    min: float
    max: float
    count: int = Field(..., ge=0)
    mean: float = 0.0

    @property
    def span(self) -> float:
        """max - min of the training values."""
        return self.max - self.min

    @property
    def degenerate(self) -> bool:
        """True when min-max normalization is undefined."""
        return self.count == 0 or self.max <= self.min


class TracedChain(BaseModel):
    """Object holding one weighted chain of a prediction trace"""

    source_attribute: str
    relations: List[str]
    query_attribute: str
    source_value: float
    entity_path: List[str]
    weight: float
    prediction: float
    score: Optional[float] = None

    @property
    def pattern(self) -> str:
        """Chain pattern as printed in key-chain reports."""
        return "(" + ", ".join([*self.relations, self.source_attribute]) + ")"


class PredictionTrace(BaseModel):
    """Object holding the explanation of one prediction"""

    entity: str
    attribute: str
    prediction: float
    target: Optional[float] = None
    toc_size: int = 0
    enhanced_size: int = 0
    fallback: bool = False
    chains: List[TracedChain] = Field(default_factory=list)

    def top_chain(self) -> Optional[TracedChain]:
        """Chain with the largest weight, or None on a fallback prediction."""
        if not self.chains:
            return None
        return max(self.chains, key=lambda chain: chain.weight)


class AttributeMetrics(BaseModel):
    """Object holding MAE and RMSE of one attribute"""

    attribute: str
    count: int
    mae: float
    rmse: float
    normalized_mae: float
    normalized_rmse: float


class MetricsReport(BaseModel):
    """Object holding per-attribute metrics plus the normalized averages"""

    name: str = "model"
    attributes: List[AttributeMetrics] = Field(default_factory=list)
    average_mae: float = 0.0
    average_rmse: float = 0.0
    excluded: List[str] = Field(default_factory=list)
    note: str = ""

    def by_attribute(self) -> Dict[str, AttributeMetrics]:
        """Metrics keyed by attribute name."""
        return {row.attribute: row for row in self.attributes}


class KeyChain(BaseModel):
    """Object holding one row of the key-chain report"""

    attribute: str
    source_attribute: str
    relations: List[str]
    count: int

    @property
    def pattern(self) -> str:
        """Chain pattern as printed in key-chain reports."""
        return "(" + ", ".join([*self.relations, self.source_attribute]) + ")"


class AuditChain(BaseModel):
    """Object holding a selected chain and its affinity score"""

    source_attribute: str
    relations: List[str]
    entity_path: List[str]
    score: float


class FilterAudit(BaseModel):
    """Object holding the filter selection of one query"""

    entity: str
    attribute: str
    toc_size: int
    selected: List[AuditChain]


class AttributeComposition(BaseModel):
    """Object holding source-attribute composition before and after filtering"""

    query_attribute: str
    queries: int
    before: Dict[str, float]
    after: Dict[str, float]
    same_attribute_before: float
    same_attribute_after: float
    same_category_before: float
    same_category_after: float


class CheckpointMeta(BaseModel, extra=Extra.ignore):
    """Object holding checkpoint metadata stored next to the parameter blobs"""

    version: int
    epoch: int
    best_metric: Optional[float] = None
    config: Dict[str, Any]
    relations: List[str]
    attributes: List[str]
    stats: List[AttributeStat]
    shapes: Dict[str, List[int]]
