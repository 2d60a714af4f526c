"""Tables and files for metrics, traces, key chains and filter analyses."""

from __future__ import annotations

import json
from collections.abc import Callable
from dataclasses import dataclass
from pathlib import Path
from typing import Mapping, Sequence

import numpy as np
import pandas as pd

from .const import LOGGER
from .engine.models import (
    AttributeComposition,
    AttributeMetrics,
    FilterAudit,
    KeyChain,
    MetricsReport,
    PredictionTrace,
    TracedChain,
)

AVERAGE_ROW = "Average*"
CASE_STUDY_COVERAGE = 0.8


@dataclass
class MetricColumnDescription:
    """Class describing one per-attribute column of a metrics table"""

    key: str
    name: str
    value_fn: Callable[[AttributeMetrics], float]
    summary_fn: Callable[[MetricsReport], float] | None = None


METRIC_COLUMNS = [
    MetricColumnDescription(key="count", name="Queries", value_fn=lambda x: x.count),
    MetricColumnDescription(key="mae", name="MAE", value_fn=lambda x: x.mae),
    MetricColumnDescription(key="rmse", name="RMSE", value_fn=lambda x: x.rmse),
    MetricColumnDescription(
        key="normalized_mae",
        name="MAE*",
        value_fn=lambda x: x.normalized_mae,
        summary_fn=lambda x: x.average_mae,
    ),
    MetricColumnDescription(
        key="normalized_rmse",
        name="RMSE*",
        value_fn=lambda x: x.normalized_rmse,
        summary_fn=lambda x: x.average_rmse,
    ),
]


@dataclass
class SummaryColumnDescription:
    """Class describing one column of a report comparison table"""

    key: str
    name: str
    value_fn: Callable[[MetricsReport], float]


SUMMARY_COLUMNS = [
    SummaryColumnDescription(key="average_mae", name="Average* MAE", value_fn=lambda x: x.average_mae),
    SummaryColumnDescription(key="average_rmse", name="Average* RMSE", value_fn=lambda x: x.average_rmse),
]


def metrics_frame(report: MetricsReport) -> pd.DataFrame:
    """Attribute rows, metric columns and a closing Average* row."""
    rows = [
        {"attribute": metrics.attribute, **{col.name: col.value_fn(metrics) for col in METRIC_COLUMNS}}
        for metrics in report.attributes
    ]
    rows.append(
        {
            "attribute": AVERAGE_ROW,
            **{col.name: col.summary_fn(report) if col.summary_fn else np.nan for col in METRIC_COLUMNS},
        }
    )
    return pd.DataFrame(rows, columns=["attribute", *[col.name for col in METRIC_COLUMNS]])


def comparison_frame(reports: Mapping[str, MetricsReport]) -> pd.DataFrame:
    """One row per report: Average* columns then per-attribute MAE."""
    rows = []
    for name, report in reports.items():
        row = {"variant": name, **{col.name: col.value_fn(report) for col in SUMMARY_COLUMNS}}
        row.update({f"{m.attribute} MAE": m.mae for m in report.attributes})
        rows.append(row)
    return pd.DataFrame(rows)


def render_table(frame: pd.DataFrame) -> str:
    return frame.to_string(index=False, float_format=lambda value: f"{value:.6g}", na_rep="")


def render_metrics(report: MetricsReport) -> str:
    """Human-readable metrics table with the Average* note as header."""
    return f"# {report.name}\n# {report.note}\n{render_table(metrics_frame(report))}\n"


def write_metrics(report: MetricsReport, out_dir: str | Path, stem: str = "metrics") -> dict[str, Path]:
    """Write CSV, text table and JSON versions of a report."""
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    paths = {
        "csv": out_dir / f"{stem}.csv",
        "txt": out_dir / f"{stem}.txt",
        "json": out_dir / f"{stem}.json",
    }
    metrics_frame(report).to_csv(paths["csv"], index=False)
    paths["txt"].write_text(render_metrics(report), encoding="utf-8")
    paths["json"].write_text(json.dumps(report.dict(), indent=2, sort_keys=True) + "\n", encoding="utf-8")
    LOGGER.info("Wrote %s metrics to %s", report.name, paths["csv"])
    return paths


def key_chain_frame(chains: Sequence[KeyChain]) -> pd.DataFrame:
    return pd.DataFrame(
        [{"attribute": chain.attribute, "chain": chain.pattern, "count": chain.count} for chain in chains],
        columns=["attribute", "chain", "count"],
    )


def render_key_chains(chains: Sequence[KeyChain], top: int | None = None) -> str:
    """Key relation-attribute chains per attribute, most frequent first."""
    frame = key_chain_frame(chains)
    if top is not None:
        frame = frame.groupby("attribute", sort=True, group_keys=False).head(top)
    return render_table(frame) + "\n"


def coverage_chains(trace: PredictionTrace, coverage: float = CASE_STUDY_COVERAGE) -> list[TracedChain]:
    """Heaviest chains whose weights add up to at least ``coverage``."""
    chosen, total = [], 0.0
    for chain in sorted(trace.chains, key=lambda chain: -chain.weight):
        if total >= coverage:
            break
        chosen.append(chain)
        total += chain.weight
    return chosen


def render_trace(trace: PredictionTrace, coverage: float = CASE_STUDY_COVERAGE) -> str:
    """Single-query case study: chain counts, dominant chains and the prediction."""
    lines = [
        f"Query: ({trace.entity}, {trace.attribute}, ?)",
        f"Tree of Chains: {trace.toc_size} chains",
        f"Enhanced ToC: {trace.enhanced_size} chains",
    ]
    if trace.fallback:
        lines.append("No chain retrieved; answering with the training mean.")
    else:
        lines.append(f"Top chains covering {coverage:.0%} of the weight:")
        for chain in coverage_chains(trace, coverage):
            lines.append(
                f"  w={chain.weight:.3f}  {chain.pattern}  source={chain.source_value:g}"
                f"  -> {chain.prediction:.6g}  [{' -> '.join(chain.entity_path)}]"
            )
    target = "" if trace.target is None else f" (target {trace.target:.6g})"
    lines.append(f"Prediction: {trace.prediction:.6g}{target}")
    return "\n".join(lines) + "\n"


def write_json(record, path: str | Path) -> Path:
    """Write one pydantic record as indented JSON."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(json.dumps(record.dict(), indent=2, sort_keys=True) + "\n", encoding="utf-8")
    return path


def write_json_list(records: Sequence, path: str | Path) -> Path:
    """Write pydantic records as a JSON array."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(json.dumps([r.dict() for r in records], indent=2, sort_keys=True) + "\n", encoding="utf-8")
    return path


def write_audits(audits: Sequence[FilterAudit], path: str | Path) -> Path:
    return write_json_list(audits, path)


def composition_frame(compositions: Sequence[AttributeComposition]) -> pd.DataFrame:
    """Same-attribute and same-category fractions before and after filtering."""
    return pd.DataFrame(
        [
            {
                "attribute": c.query_attribute,
                "queries": c.queries,
                "same_attribute_before": c.same_attribute_before,
                "same_attribute_after": c.same_attribute_after,
                "same_category_before": c.same_category_before,
                "same_category_after": c.same_category_after,
            }
            for c in compositions
        ],
        columns=[
            "attribute",
            "queries",
            "same_attribute_before",
            "same_attribute_after",
            "same_category_before",
            "same_category_after",
        ],
    )
