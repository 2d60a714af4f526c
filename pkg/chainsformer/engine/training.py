"""One training epoch: retrieval, filtering, forward pass, loss and Adam updates"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np
from tqdm import tqdm

from ..const import LOGGER
from . import autodiff as ad
from .autodiff import Adam, Tensor
from .exceptions import NonFiniteError, TrainingFault
from .filter import EnhancedToC
from .graph import AttributeStats, Query, normalize
from .model import ChainsFormer
from .retrieval import TreeOfChains


def query_loss(predicted: float, target: float, attribute: int, stats: AttributeStats) -> float:
    """(norm(n_q) - norm(n̂_q))² for a single query."""
    diff = normalize(target, attribute, stats) - normalize(predicted, attribute, stats)
    return diff * diff


def batch_loss(predictions: Tensor, targets: np.ndarray, kind: str = "l2") -> Tensor:
    """Mean squared (l2) or absolute (l1) error over the batch, in normalized units."""
    if kind == "l1":
        return ad.absolute_error(predictions, targets)
    return ad.squared_error(predictions, targets)


@dataclass
class EpochResult:
    """Loss bookkeeping of one epoch."""

    epoch: int
    loss: float
    queries: int
    skipped: int
    grad_norm: float

    @property
    def mean_loss(self) -> float:
        return self.loss / self.queries if self.queries else 0.0


TocCache = dict[tuple[int, int], TreeOfChains]


def train_epoch(
    model: ChainsFormer,
    queries: Sequence[Query],
    optimizer: Adam,
    epoch: int,
    toc_cache: TocCache | None = None,
    progress: bool = False,
) -> EpochResult:
    """Run one pass over the training queries; returns the accumulated per-query loss.

    Queries without chains, or whose attribute has no usable range, are skipped.
    """
    config = model.config
    stage = 0 if toc_cache is not None else epoch + 1
    order = np.random.default_rng((config.seed, epoch)).permutation(len(queries))
    batches = [order[i : i + config.batch_size] for i in range(0, len(order), config.batch_size)]

    total, counted, skipped, grad_norm = 0.0, 0, 0, 0.0
    for number, batch in enumerate(tqdm(batches, desc=f"epoch {epoch}", disable=not progress, leave=False)):
        enhanced: list[EnhancedToC] = []
        targets: list[float] = []
        for idx in batch:
            query = queries[idx]
            if model.stats[query.attribute].degenerate or query.target is None:
                skipped += 1
                continue
            toc = _tree(model, query, stage, toc_cache)
            if toc.empty:
                skipped += 1
                continue
            enhanced.append(model.select(toc, stage))
            targets.append(normalize(query.target, query.attribute, model.stats))
        if not enhanced:
            continue

        try:
            output = model(enhanced)
            loss = batch_loss(output.prediction, np.asarray(targets), config.loss)
            optimizer.zero_grad()
            ad.backward(loss)
            grad_norm = optimizer.step()
        except NonFiniteError as err:
            entities = [model.kg.entities.name(item.query.entity) for item in enhanced]
            LOGGER.error("Non-finite values in epoch %d batch %d (%s)", epoch, number, entities)
            raise TrainingFault(f"epoch {epoch}, batch {number}: {err}") from err

        total += loss.item() * len(enhanced)
        counted += len(enhanced)

    if skipped:
        LOGGER.warning("Epoch %d skipped %d queries without chains or usable stats", epoch, skipped)
    return EpochResult(epoch, total, counted, skipped, grad_norm)


def _tree(model: ChainsFormer, query: Query, stage: int, cache: TocCache | None) -> TreeOfChains:
    if cache is None:
        return model.retrieve(query, stage)
    key = (query.entity, query.attribute)
    if key not in cache:
        cache[key] = model.retrieve(query, stage)
    return cache[key]
