"""Metrics, the train-mean baseline, ablation variants and filter analysis"""

from __future__ import annotations

import dataclasses
import math
from collections import Counter, defaultdict
from dataclasses import dataclass
from typing import Callable, Iterable, Mapping, Sequence

import numpy as np

from ..const import LOGGER
from .exceptions import ConfigError
from .graph import AttributeStats, KnowledgeGraph, Query
from .model import ChainsFormer, TrainConfig
from .models import AttributeComposition, AttributeMetrics, MetricsReport, PredictionTrace

AVERAGE_NOTE = "Average* is the unweighted mean over attributes of min-max normalized MAE and RMSE."

TEMPORAL_HINTS = ("birth", "death", "created", "destroyed", "happened", "founded", "release", "date")
SPATIAL_HINTS = ("latitude", "longitude")


def attribute_category(name: str) -> str:
    """temporal, spatial or quantity, guessed from the attribute name."""
    lowered = name.lower()
    if any(hint in lowered for hint in TEMPORAL_HINTS):
        return "temporal"
    if any(hint in lowered for hint in SPATIAL_HINTS):
        return "spatial"
    return "quantity"


def metrics_from_predictions(
    rows: Iterable[tuple[str, float, float]],
    stats: Mapping[str, float],
    attributes: Sequence[str],
    name: str = "model",
) -> MetricsReport:
    """Build a report from (attribute, target, prediction) rows.

    ``stats`` maps attribute names to their training span (max - min). Attributes without
    rows are listed as excluded.
    """
    errors: dict[str, list[float]] = defaultdict(list)
    for attribute, target, prediction in rows:
        errors[attribute].append(prediction - target)

    metrics = []
    for attribute in attributes:
        if attribute not in errors:
            continue
        diff = np.asarray(errors[attribute], dtype=np.float64)
        mae = float(np.mean(np.abs(diff)))
        rmse = float(np.sqrt(np.mean(diff * diff)))
        span = stats.get(attribute, 0.0)
        metrics.append(
            AttributeMetrics(
                attribute=attribute,
                count=int(diff.size),
                mae=mae,
                rmse=rmse,
                normalized_mae=mae / span if span > 0 else math.nan,
                normalized_rmse=rmse / span if span > 0 else math.nan,
            )
        )

    usable = [m for m in metrics if not math.isnan(m.normalized_mae)]
    excluded = [a for a in attributes if a not in errors]
    note = AVERAGE_NOTE
    if excluded:
        note += " Excluded (no queries): " + ", ".join(excluded) + "."
    return MetricsReport(
        name=name,
        attributes=metrics,
        average_mae=float(np.mean([m.normalized_mae for m in usable])) if usable else 0.0,
        average_rmse=float(np.mean([m.normalized_rmse for m in usable])) if usable else 0.0,
        excluded=excluded,
        note=note,
    )


def _spans(stats: AttributeStats) -> dict[str, float]:
    return {record.attribute: record.span for record in stats.as_list() if not record.degenerate}


def report_from_traces(
    traces: Sequence[PredictionTrace], kg: KnowledgeGraph, stats: AttributeStats, name: str = "model"
) -> MetricsReport:
    """Metrics of traces that carry a target."""
    rows = [(t.attribute, t.target, t.prediction) for t in traces if t.target is not None]
    return metrics_from_predictions(rows, _spans(stats), kg.attributes.names, name)


def evaluate(model: ChainsFormer, queries: Sequence[Query], name: str = "model") -> MetricsReport:
    """Predict every query and score against its target."""
    traces = model.predict(queries)
    fallbacks = sum(trace.fallback for trace in traces)
    if fallbacks:
        LOGGER.info("%d of %d queries used the training-mean fallback", fallbacks, len(traces))
    return report_from_traces(traces, model.kg, model.stats, name)


def train_mean_baseline(
    kg: KnowledgeGraph, stats: AttributeStats, queries: Sequence[Query], name: str = "train-mean"
) -> MetricsReport:
    """Score the predictor that always answers the training mean of the attribute."""
    rows = [
        (kg.attributes.name(q.attribute), q.target, stats[q.attribute].mean)
        for q in queries
        if q.target is not None
    ]
    return metrics_from_predictions(rows, _spans(stats), kg.attributes.names, name)


@dataclass(frozen=True)
class AblationVariant:
    """A named degradation of the full model."""

    key: str
    name: str
    apply_fn: Callable[[TrainConfig], TrainConfig]


def _with(**changes) -> Callable[[TrainConfig], TrainConfig]:
    return lambda config: dataclasses.replace(config, **changes)


ABLATION_VARIANTS = [
    AblationVariant("w/o_hyperbolic_filter", "w/o Hyperbolic Filter", _with(filter_space="random")),
    AblationVariant("euclidean_filter", "w Euclidean Filter", _with(filter_space="euclidean")),
    AblationVariant("w/o_chain_encoder", "w/o Chain Encoder", _with(chain_encoder="mean")),
    AblationVariant("lstm_chain_encoder", "w LSTM as Chain Encoder", _with(chain_encoder="lstm")),
    AblationVariant("w/o_numerical_aware", "w/o Numerical-Aware", _with(numerical_aware=False)),
    AblationVariant("numerical_aware_log", "w Numerical-Aware by Log", _with(value_encoding="log")),
    AblationVariant("w/o_numerical_projection", "w/o Numerical Projection", _with(projection="direct")),
    AblationVariant("w/o_chain_weighting", "w/o Chain Weighting", _with(chain_weighting=False)),
]

FULL_MODEL = "full"


def ablation_variant(key: str) -> AblationVariant:
    for variant in ABLATION_VARIANTS:
        if variant.key == key:
            return variant
    raise ConfigError(f"unknown ablation variant {key!r}; choose from {[v.key for v in ABLATION_VARIANTS]}")


def ablation_run(
    config: TrainConfig,
    toggles: Sequence[str],
    train_fn: Callable[[TrainConfig], ChainsFormer],
    queries: Sequence[Query],
) -> dict[str, MetricsReport]:
    """Train the full model and each requested variant with identical seeds and data."""
    variants = [ablation_variant(key) for key in toggles]
    reports = {}
    for key, variant_config in [(FULL_MODEL, config)] + [(v.key, v.apply_fn(config)) for v in variants]:
        LOGGER.info("Ablation run %s", key)
        reports[key] = evaluate(train_fn(variant_config), queries, name=key)
    return reports


def _fractions(counter: Counter[str]) -> dict[str, float]:
    total = sum(counter.values())
    return {key: count / total for key, count in sorted(counter.items())} if total else {}


def filter_analysis(model: ChainsFormer, queries: Sequence[Query]) -> list[AttributeComposition]:
    """Source-attribute composition of each query attribute's ToC before and after filtering."""
    kg = model.kg
    before: dict[int, Counter[str]] = defaultdict(Counter)
    after: dict[int, Counter[str]] = defaultdict(Counter)
    asked: Counter[int] = Counter()
    for query in queries:
        toc = model.retrieve(query)
        if toc.empty:
            continue
        asked[query.attribute] += 1
        before[query.attribute].update(kg.attributes.name(c.source_attribute) for c in toc.chains)
        after[query.attribute].update(kg.attributes.name(c.source_attribute) for c in model.select(toc).chains)

    report = []
    for attribute in sorted(asked):
        name = kg.attributes.name(attribute)
        category = attribute_category(name)
        pre, post = _fractions(before[attribute]), _fractions(after[attribute])
        report.append(
            AttributeComposition(
                query_attribute=name,
                queries=asked[attribute],
                before=pre,
                after=post,
                same_attribute_before=pre.get(name, 0.0),
                same_attribute_after=post.get(name, 0.0),
                same_category_before=sum(v for k, v in pre.items() if attribute_category(k) == category),
                same_category_after=sum(v for k, v in post.items() if attribute_category(k) == category),
            )
        )
    return report
