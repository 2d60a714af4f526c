"""Numerical reasoner: per-chain projections, Treeformer weights and aggregation"""

from __future__ import annotations

from collections import Counter
from typing import Iterable, Sequence

import numpy as np

from ..const import PROJECTIONS
from . import autodiff as ad
from .autodiff import Parameter, Tensor
from .exceptions import ConfigError, ShapeError
from .models import KeyChain, PredictionTrace
from .nn import MLP, Linear, Module, TransformerStack


class ProjectionHead(Module):
    """MLP on ẽ_c emitting (α, β); in direct mode the first output is the prediction itself."""

    def __init__(self, rng: np.random.Generator, dim: int, mode: str = "scaling", hidden: int | None = None) -> None:
        if mode not in PROJECTIONS:
            raise ConfigError(f"unknown projection mode {mode!r}")
        self.mode = mode
        self.head = MLP(rng, dim, hidden or dim, 2, name="projection.head")
        self.head.out.weight.data *= 0.1
        self.head.out.bias.data = np.array([0.5 if mode == "direct" else 1.0, 0.0])

    def forward(self, reps: Tensor, source: np.ndarray | Tensor) -> Tensor:
        return project_value(reps, source, self.mode, self)

    def coefficients(self, reps: Tensor) -> tuple[Tensor, Tensor]:
        out = self.head(reps)
        return out[..., 0], out[..., 1]


def apply_projection(
    mode: str, source: Tensor | np.ndarray | float, alpha: Tensor | float, beta: Tensor | float
) -> Tensor:
    """translation: n_p + β, scaling: α·n_p, combined: α·(n_p + β), direct: α; clamped to [0, 1]."""
    source = ad.as_tensor(source)
    alpha = ad.as_tensor(alpha)
    beta = ad.as_tensor(beta)
    if mode == "translation":
        out = source + beta
    elif mode == "scaling":
        out = alpha * source
    elif mode == "combined":
        out = alpha * (source + beta)
    elif mode == "direct":
        out = alpha
    else:
        raise ConfigError(f"unknown projection mode {mode!r}")
    return ad.clip(out, 0.0, 1.0)


def project_value(reps: Tensor, source: np.ndarray | Tensor, mode: str, head: ProjectionHead) -> Tensor:
    """Normalized per-chain predictions; ``source`` holds n_p normalized by the source attribute."""
    alpha, beta = head.coefficients(reps)
    return apply_projection(mode, source, alpha, beta)


class Treeformer(Module):
    """Self-attention across the chains of one query, producing importance weights ω."""

    def __init__(
        self, rng: np.random.Generator, dim: int, heads: int, layers: int, max_hops: int
    ) -> None:
        self.max_hops = max_hops
        self.length_embeddings = Parameter(rng.normal(0.0, 0.1, size=(max_hops, dim)), name="treeformer.lengths")
        self.stack = TransformerStack(rng, dim, heads, layers, output_bias=False, name="treeformer.stack")
        self.score = Linear(rng, dim, 1, bias=False, name="treeformer.score")

    def forward(self, reps: Tensor, lengths: np.ndarray, mask: np.ndarray) -> Tensor:
        """ω of shape (queries, chains) from reps (queries, chains, d); padding gets exactly 0."""
        lengths = np.asarray(lengths)
        mask = np.asarray(mask, dtype=bool)
        if not np.all(mask.any(axis=-1)):
            raise ShapeError("cannot weight a query without chains")
        real = lengths[mask]
        if real.min() < 1 or real.max() > self.max_hops:
            raise ConfigError(f"chain length outside 1..{self.max_hops}")
        rows = np.where(mask, lengths - 1, 0)
        x = self.stack(reps + self.length_embeddings[rows], mask)
        logits = self.score(x).reshape(*mask.shape)
        return ad.softmax(logits, axis=-1, mask=mask)


def uniform_weights(mask: np.ndarray) -> Tensor:
    """Equal weight on every real chain."""
    mask = np.asarray(mask, dtype=np.float64)
    if not np.all(mask.sum(axis=-1) > 0):
        raise ShapeError("cannot weight a query without chains")
    return ad.Tensor(mask / mask.sum(axis=-1, keepdims=True))


def weight_chains(reps: Tensor, lengths: Sequence[int], tree: Treeformer) -> Tensor:
    """ω for the chains of a single query, reps of shape (k, d)."""
    k = reps.shape[0]
    if k == 0:
        raise ShapeError("cannot weight a query without chains")
    weights = tree(reps.reshape(1, k, reps.shape[1]), np.asarray(lengths)[None, :], np.ones((1, k), dtype=bool))
    return weights.reshape(k)


def aggregate(weights: Tensor, predictions: Tensor) -> Tensor:
    """Σ ω_i · n̂_i over the last axis."""
    if weights.shape != predictions.shape:
        raise ShapeError(f"weights {weights.shape} vs predictions {predictions.shape}")
    return (weights * predictions).sum(axis=-1)


def top_chain_report(traces: Iterable[PredictionTrace], attribute: str | None = None) -> list[KeyChain]:
    """Count how often each (source attribute, relations) pattern carries a query's top weight."""
    counts: Counter[tuple[str, str, tuple[str, ...]]] = Counter()
    for trace in traces:
        if attribute is not None and trace.attribute != attribute:
            continue
        top = trace.top_chain()
        if top is None:
            continue
        counts[(trace.attribute, top.source_attribute, tuple(top.relations))] += 1
    ranked = sorted(counts.items(), key=lambda item: (-item[1], item[0]))
    return [
        KeyChain(attribute=attr, source_attribute=source, relations=list(relations), count=count)
        for (attr, source, relations), count in ranked
    ]
