"""Hyperbolic filter: chain embeddings, affinity scores and top-k selection"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from ..const import DEFAULT_CURVATURE, FILTER_SPACES
from . import autodiff as ad
from .autodiff import Parameter, Tensor
from .exceptions import ConfigError, UnknownIdentifierError
from .graph import KnowledgeGraph, Query
from .hyperbolic import PoincareVector, distance_array, mobius_add_array
from .models import AuditChain, FilterAudit
from .nn import Module
from .retrieval import RAChain, Seed, TreeOfChains

INIT_RADIUS = 0.1


class FilterEmbeddings(Module):
    """Relation and attribute points in the Poincaré ball (or plain vectors in Euclidean mode)."""

    def __init__(
        self,
        rng: np.random.Generator,
        relations: int,
        attributes: int,
        dim: int,
        curvature: float = DEFAULT_CURVATURE,
        space: str = "hyperbolic",
    ) -> None:
        if space not in FILTER_SPACES:
            raise ConfigError(f"unknown filter space {space!r}")
        self.dim = dim
        self.space = space
        self.curvature = curvature
        ball = curvature if self.hyperbolic else None
        bound = INIT_RADIUS / np.sqrt(dim * curvature)
        self.relation_embeddings = Parameter(
            rng.uniform(-bound, bound, size=(relations, dim)), name="filter.relations", curvature=ball
        )
        self.attribute_embeddings = Parameter(
            rng.uniform(-bound, bound, size=(attributes, dim)), name="filter.attributes", curvature=ball
        )

    @property
    def hyperbolic(self) -> bool:
        """False for the Euclidean and random-selection variants."""
        return self.space != "euclidean"

    @property
    def relation_count(self) -> int:
        return self.relation_embeddings.shape[0]

    @property
    def attribute_count(self) -> int:
        return self.attribute_embeddings.shape[0]

    def relation(self, idx: int) -> PoincareVector:
        self._check(relations=(idx,))
        return PoincareVector(self.relation_embeddings.data[idx], self.curvature)

    def attribute(self, idx: int) -> PoincareVector:
        self._check(attributes=(idx,))
        return PoincareVector(self.attribute_embeddings.data[idx], self.curvature)

    def _check(self, relations: Sequence[int] = (), attributes: Sequence[int] = ()) -> None:
        for idx in relations:
            if not 0 <= idx < self.relation_count:
                raise UnknownIdentifierError(f"no filter embedding for relation id {idx}")
        for idx in attributes:
            if not 0 <= idx < self.attribute_count:
                raise UnknownIdentifierError(f"no filter embedding for attribute id {idx}")

    def token_table(self) -> Tensor:
        """Token inputs for the chain encoder: attribute rows first, then relation rows.

        Hyperbolic points are mapped to the tangent space at the origin.
        """
        attributes, relations = self.attribute_embeddings, self.relation_embeddings
        if self.hyperbolic:
            attributes = log_map_rows(attributes, self.curvature)
            relations = log_map_rows(relations, self.curvature)
        return ad.concat([attributes, relations], axis=0)


def log_map_rows(points: Tensor, curvature: float) -> Tensor:
    """Differentiable origin log map applied row-wise."""
    sqrt_c = float(np.sqrt(curvature))
    norm = ad.sqrt((points * points).sum(axis=-1, keepdims=True) + 1e-30)
    scaled = norm * sqrt_c
    return points * (ad.artanh(scaled) / scaled)


@dataclass
class EnhancedToC:
    """The top-k chains of a Tree of Chains with their affinity scores."""

    query: Query
    chains: list[RAChain] = field(default_factory=list)
    scores: np.ndarray = field(default_factory=lambda: np.zeros(0))
    toc_size: int = 0

    def __len__(self) -> int:
        return len(self.chains)


def embed_chains(chains: Sequence[RAChain], emb: FilterEmbeddings) -> np.ndarray:
    """h_c for each chain: left fold of Möbius addition (vector sum in Euclidean mode)."""
    if not chains:
        return np.zeros((0, emb.dim))
    for chain in chains:
        emb._check(relations=chain.relations)
    table = emb.relation_embeddings.data
    lengths = np.array([chain.length for chain in chains])
    h = table[[chain.relations[0] for chain in chains]].copy()
    for hop in range(1, int(lengths.max())):
        rows = np.flatnonzero(lengths > hop)
        step = table[[chains[i].relations[hop] for i in rows]]
        if emb.hyperbolic:
            h[rows] = mobius_add_array(h[rows], step, emb.curvature)
        else:
            h[rows] = h[rows] + step
    return h


def embed_chain(chain: RAChain, emb: FilterEmbeddings) -> PoincareVector:
    """h_{r_1} ⊕ h_{r_2} ⊕ ... ⊕ h_{r_l}, folded left to right."""
    return PoincareVector(embed_chains([chain], emb)[0], emb.curvature)


def _distance(x: np.ndarray, y: np.ndarray, emb: FilterEmbeddings) -> np.ndarray:
    if emb.hyperbolic:
        return distance_array(x, y, emb.curvature)
    return np.sqrt(np.sum((x - y) ** 2, axis=-1))


def score_chains(
    chains: Sequence[RAChain], query_attribute: int, emb: FilterEmbeddings, lam: float
) -> np.ndarray:
    """λ·d(h_{a_p}, h_{a_q}) + (1-λ)·d(h_c, h_{a_q}) for every chain."""
    if not chains:
        return np.zeros(0)
    sources = [chain.source_attribute for chain in chains]
    emb._check(attributes=[*sources, query_attribute])
    attributes = emb.attribute_embeddings.data
    target = attributes[query_attribute][None, :]
    intra = _distance(attributes[sources], target, emb)
    inter = _distance(embed_chains(chains, emb), target, emb)
    return lam * intra + (1.0 - lam) * inter


def affinity_score(chain: RAChain, query_attribute: int, emb: FilterEmbeddings, lam: float) -> float:
    """Affinity of one chain to the query attribute; lower is more relevant."""
    return float(score_chains([chain], query_attribute, emb, lam)[0])


def rank_chains(
    scores: np.ndarray, chains: Sequence[RAChain], k: int, orientation: str = "smallest"
) -> list[int]:
    """Indices of the k best chains, ordered by (score, length, entity path)."""
    sign = 1.0 if orientation == "smallest" else -1.0
    order = sorted(
        range(len(chains)),
        key=lambda i: (sign * float(scores[i]), chains[i].length, *chains[i].sort_key()),
    )
    return order[:k]


def select_top_k(
    toc: TreeOfChains,
    emb: FilterEmbeddings,
    k: int,
    lam: float,
    orientation: str = "smallest",
    rng_seed: Seed | None = None,
) -> EnhancedToC:
    """Keep the k most relevant chains of a Tree of Chains.

    With the ``random`` filter space k chains are drawn uniformly instead and their
    scores are reported as zero.
    """
    if k < 1:
        raise ConfigError("top_k must be positive")
    chains = toc.chains
    if emb.space == "random":
        picked = np.random.default_rng(rng_seed).permutation(len(chains))[:k]
        kept = [chains[i] for i in sorted(picked)]
        return EnhancedToC(toc.query, kept, np.zeros(len(kept)), len(chains))
    scores = score_chains(chains, toc.query.attribute, emb, lam)
    best = rank_chains(scores, chains, k, orientation)
    return EnhancedToC(toc.query, [chains[i] for i in best], scores[best], len(chains))


def audit(enhanced: EnhancedToC, kg: KnowledgeGraph) -> FilterAudit:
    """Readable record of a filter selection."""
    return FilterAudit(
        entity=kg.entities.name(enhanced.query.entity),
        attribute=kg.attributes.name(enhanced.query.attribute),
        toc_size=enhanced.toc_size,
        selected=[
            AuditChain(
                source_attribute=kg.attributes.name(chain.source_attribute),
                relations=[kg.relations.name(r) for r in chain.relations],
                entity_path=[kg.entities.name(e) for e in chain.entity_path],
                score=float(score),
            )
            for chain, score in zip(enhanced.chains, enhanced.scores)
        ],
    )
