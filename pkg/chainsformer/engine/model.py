"""ChainsFormer: retrieval, filter, encoder and reasoner wired into one model"""

from __future__ import annotations

from dataclasses import asdict, dataclass, field, fields
from typing import Any, Iterable, Mapping, Sequence

import numpy as np

from ..const import (
    CHAIN_ENCODERS,
    CONF_LAMBDA,
    DEFAULT_AFFINE_HIDDEN,
    DEFAULT_BATCH_SIZE,
    DEFAULT_CURVATURE,
    DEFAULT_ENCODER_DIM,
    DEFAULT_EPOCHS,
    DEFAULT_EPSILON,
    DEFAULT_FILTER_DIM,
    DEFAULT_GRAD_CLIP,
    DEFAULT_HEADS,
    DEFAULT_LAMBDA,
    DEFAULT_LAYERS,
    DEFAULT_LEARNING_RATE,
    DEFAULT_LOSS,
    DEFAULT_MAX_HOPS,
    DEFAULT_PATIENCE,
    DEFAULT_PROJECTION,
    DEFAULT_SEED,
    DEFAULT_TOP_K,
    DEFAULT_WALKS,
    FILTER_SPACES,
    LOGGER,
    LOSSES,
    PROJECTIONS,
    SCORE_ORIENTATIONS,
    VALUE_ENCODINGS,
)
from . import autodiff as ad
from .autodiff import Tensor
from .encoder import AffineTransfer, ChainEncoder, batch_chains, value_codes
from .exceptions import ConfigError
from .filter import EnhancedToC, FilterEmbeddings, select_top_k
from .graph import AttributeStats, KnowledgeGraph, Query, denormalize, normalize
from .models import PredictionTrace, TracedChain
from .nn import Module
from .reasoner import ProjectionHead, Treeformer, aggregate, uniform_weights
from .retrieval import RAChain, TreeOfChains, sample_tree

INFERENCE_STAGE = 0

POSITIVE_FIELDS = (
    "epochs",
    "walks",
    "top_k",
    "max_hops",
    "encoder_dim",
    "filter_dim",
    "layers",
    "heads",
    "affine_hidden",
    "batch_size",
)


@dataclass
class TrainConfig:
    """Hyperparameters and ablation switches of one model."""

    epochs: int = DEFAULT_EPOCHS
    learning_rate: float = DEFAULT_LEARNING_RATE
    walks: int = DEFAULT_WALKS
    top_k: int = DEFAULT_TOP_K
    max_hops: int = DEFAULT_MAX_HOPS
    encoder_dim: int = DEFAULT_ENCODER_DIM
    filter_dim: int = DEFAULT_FILTER_DIM
    layers: int = DEFAULT_LAYERS
    heads: int = DEFAULT_HEADS
    affine_hidden: int = DEFAULT_AFFINE_HIDDEN
    lam: float = DEFAULT_LAMBDA
    curvature: float = DEFAULT_CURVATURE
    projection: str = DEFAULT_PROJECTION
    loss: str = DEFAULT_LOSS
    batch_size: int = DEFAULT_BATCH_SIZE
    seed: int = DEFAULT_SEED
    convergence_threshold: float = DEFAULT_EPSILON
    patience: int = DEFAULT_PATIENCE
    grad_clip: float = DEFAULT_GRAD_CLIP
    cache_toc: bool = False
    score_orientation: str = "smallest"
    filter_space: str = "hyperbolic"
    chain_encoder: str = "transformer"
    value_encoding: str = "float64"
    numerical_aware: bool = True
    chain_weighting: bool = True
    same_attribute_only: bool = False

    def __post_init__(self) -> None:
        self.validate()

    def validate(self) -> None:
        """Raise ConfigError on out-of-range or inconsistent values."""
        for name in POSITIVE_FIELDS:
            if getattr(self, name) < 1:
                raise ConfigError(f"{name} must be positive, got {getattr(self, name)}")
        if self.top_k > self.walks:
            raise ConfigError(f"top_k ({self.top_k}) cannot exceed walks ({self.walks})")
        if not 0.0 <= self.lam <= 1.0:
            raise ConfigError(f"lambda must lie in [0, 1], got {self.lam}")
        if self.curvature <= 0 or self.learning_rate < 0 or self.patience < 0 or self.convergence_threshold < 0:
            raise ConfigError("curvature must be positive; learning_rate, patience and threshold non-negative")
        if self.encoder_dim % self.heads:
            raise ConfigError(f"heads ({self.heads}) must divide encoder_dim ({self.encoder_dim})")
        for name, allowed in (
            ("projection", PROJECTIONS),
            ("loss", LOSSES),
            ("score_orientation", SCORE_ORIENTATIONS),
            ("filter_space", FILTER_SPACES),
            ("chain_encoder", CHAIN_ENCODERS),
            ("value_encoding", VALUE_ENCODINGS),
        ):
            if getattr(self, name) not in allowed:
                raise ConfigError(f"{name} must be one of {allowed}, got {getattr(self, name)!r}")

    @classmethod
    def from_mapping(cls, conf: Mapping[str, Any]) -> TrainConfig:
        """Pick the model keys out of a run configuration mapping."""
        values = {}
        for item in fields(cls):
            key = CONF_LAMBDA if item.name == "lam" else item.name
            if key in conf and conf[key] is not None:
                values[item.name] = conf[key]
        return cls(**values)

    def to_mapping(self) -> dict[str, Any]:
        """Configuration keys and values of this config."""
        values = asdict(self)
        values[CONF_LAMBDA] = values.pop("lam")
        return values


@dataclass
class BatchOutput:
    """Forward results for a batch of queries; predictions are normalized."""

    prediction: Tensor
    weights: Tensor
    chain_predictions: Tensor
    mask: np.ndarray
    enhanced: list[EnhancedToC] = field(default_factory=list)


def query_seed(seed: int, stage: int, query: Query, salt: int = 0) -> tuple[int, ...]:
    """Retrieval seed of a query, independent of batch order."""
    return (seed, stage, query.entity, query.attribute, salt)


class ChainsFormer(Module):
    """End-to-end numerical reasoning model over one knowledge graph."""

    def __init__(self, kg: KnowledgeGraph, stats: AttributeStats, config: TrainConfig) -> None:
        rng = np.random.default_rng(config.seed)
        self.kg = kg
        self.stats = stats
        self.config = config
        self.filter = FilterEmbeddings(
            rng, len(kg.relations), len(kg.attributes), config.filter_dim, config.curvature, config.filter_space
        )
        self.encoder = ChainEncoder(
            rng, config.filter_dim, config.encoder_dim, config.layers, config.heads, config.chain_encoder
        )
        self.affine = (
            AffineTransfer(rng, config.encoder_dim, config.affine_hidden) if config.numerical_aware else None
        )
        self.projection = ProjectionHead(rng, config.encoder_dim, config.projection)
        self.treeformer = (
            Treeformer(rng, config.encoder_dim, config.heads, config.layers, config.max_hops)
            if config.chain_weighting
            else None
        )

    def retrieve(self, query: Query, stage: int = INFERENCE_STAGE) -> TreeOfChains:
        """Sample the Tree of Chains of a query."""
        return sample_tree(
            self.kg,
            query,
            self.config.walks,
            self.config.max_hops,
            query_seed(self.config.seed, stage, query),
            self.config.same_attribute_only,
        )

    def select(self, toc: TreeOfChains, stage: int = INFERENCE_STAGE) -> EnhancedToC:
        """Filter a Tree of Chains down to its Enhanced ToC."""
        return select_top_k(
            toc,
            self.filter,
            self.config.top_k,
            self.config.lam,
            self.config.score_orientation,
            rng_seed=query_seed(self.config.seed, stage, toc.query, salt=1),
        )

    def _source_values(self, chains: Iterable[RAChain]) -> np.ndarray:
        """n_p normalized by each source attribute; a degenerate range maps to 0."""
        values = []
        for chain in chains:
            if self.stats[chain.source_attribute].degenerate:
                values.append(0.0)
            else:
                values.append(normalize(chain.source_value, chain.source_attribute, self.stats))
        return np.asarray(values, dtype=np.float64)

    def forward(self, enhanced: Sequence[EnhancedToC]) -> BatchOutput:
        """Predict normalized values for queries whose Enhanced ToC is non-empty."""
        chains = [chain for item in enhanced for chain in item.chains]
        batch = batch_chains(chains, self.filter.attribute_count, self.filter.relation_count, self.config.max_hops)
        reps = self.encoder(batch, self.filter)
        if self.affine is not None:
            reps = self.affine(reps, value_codes([c.source_value for c in chains], self.config.value_encoding))
        predictions = self.projection(reps, self._source_values(chains))

        width = max(len(item) for item in enhanced)
        gather = np.zeros((len(enhanced), width), dtype=np.int64)
        mask = np.zeros((len(enhanced), width), dtype=bool)
        offset = 0
        for row, item in enumerate(enhanced):
            gather[row, : len(item)] = np.arange(offset, offset + len(item))
            mask[row, : len(item)] = True
            offset += len(item)

        chain_predictions = predictions[gather]
        if self.treeformer is not None:
            lengths = np.where(mask, batch.lengths[gather], 1)
            weights = self.treeformer(reps[gather], lengths, mask)
        else:
            weights = uniform_weights(mask)
        return BatchOutput(aggregate(weights, chain_predictions), weights, chain_predictions, mask, list(enhanced))

    def fallback(self, query: Query) -> float:
        """Training mean of the query attribute."""
        return self.stats[query.attribute].mean

    def predict(
        self, queries: Sequence[Query], stage: int = INFERENCE_STAGE, batch_size: int | None = None
    ) -> list[PredictionTrace]:
        """Native-unit predictions with their explanation traces."""
        batch_size = batch_size or self.config.batch_size
        traces: list[PredictionTrace] = []
        with ad.no_grad():
            for start in range(0, len(queries), batch_size):
                traces.extend(self._predict_batch(queries[start : start + batch_size], stage))
        return traces

    def _predict_batch(self, queries: Sequence[Query], stage: int) -> list[PredictionTrace]:
        tocs = [self.retrieve(query, stage) for query in queries]
        ready = [i for i, toc in enumerate(tocs) if not toc.empty and not self.stats[queries[i].attribute].degenerate]
        enhanced = {i: self.select(tocs[i], stage) for i in ready}
        output = self.forward([enhanced[i] for i in ready]) if ready else None

        traces = []
        for i, query in enumerate(queries):
            base = {
                "entity": self.kg.entities.name(query.entity),
                "attribute": self.kg.attributes.name(query.attribute),
                "target": query.target,
                "toc_size": len(tocs[i]),
            }
            if i not in enhanced:
                LOGGER.debug("Falling back to the training mean for %s", base)
                traces.append(PredictionTrace(prediction=self.fallback(query), fallback=True, **base))
                continue
            row = ready.index(i)
            traces.append(self._trace(query, enhanced[i], output, row, base))
        return traces

    def _trace(self, query: Query, enhanced: EnhancedToC, output: BatchOutput, row: int, base: dict) -> PredictionTrace:
        kg = self.kg
        chains = []
        for j, chain in enumerate(enhanced.chains):
            chains.append(
                TracedChain(
                    source_attribute=kg.attributes.name(chain.source_attribute),
                    relations=[kg.relations.name(r) for r in chain.relations],
                    query_attribute=kg.attributes.name(chain.query_attribute),
                    source_value=chain.source_value,
                    entity_path=[kg.entities.name(e) for e in chain.entity_path],
                    weight=float(output.weights.data[row, j]),
                    prediction=denormalize(float(output.chain_predictions.data[row, j]), query.attribute, self.stats),
                    score=float(enhanced.scores[j]),
                )
            )
        chains.sort(key=lambda chain: -chain.weight)
        prediction = denormalize(float(output.prediction.data[row]), query.attribute, self.stats)
        return PredictionTrace(prediction=prediction, enhanced_size=len(enhanced), chains=chains, **base)
