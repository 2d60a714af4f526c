"""Checkpoint container: named parameter blobs plus JSON metadata in one .npz file.

Layout: every parameter is stored under ``param.<dotted name>`` as a float64 array and
``__meta__`` holds a JSON string of ``CheckpointMeta`` (format version, epoch, best
validation metric, run configuration, relation/attribute vocabularies, attribute stats
and parameter shapes).
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path
from typing import Any, Mapping

import numpy as np

from ..const import CHECKPOINT_VERSION, LOGGER
from .exceptions import CheckpointError
from .graph import AttributeStats, KnowledgeGraph
from .model import ChainsFormer, TrainConfig
from .models import CheckpointMeta

PARAM_PREFIX = "param."
META_KEY = "__meta__"


@dataclass
class Checkpoint:
    """Snapshot of a model's parameters and the metadata needed to rebuild it."""

    params: dict[str, np.ndarray]
    meta: CheckpointMeta

    @classmethod
    def capture(
        cls,
        model: ChainsFormer,
        epoch: int,
        best_metric: float | None = None,
        run_config: Mapping[str, Any] | None = None,
    ) -> Checkpoint:
        """Copy the current parameters of a model."""
        params = {name: p.data.copy() for name, p in model.named_parameters()}
        config = dict(run_config or {})
        config.update(model.config.to_mapping())
        meta = CheckpointMeta(
            version=CHECKPOINT_VERSION,
            epoch=epoch,
            best_metric=best_metric,
            config=config,
            relations=model.kg.relations.names,
            attributes=model.kg.attributes.names,
            stats=model.stats.as_list(),
            shapes={name: list(array.shape) for name, array in params.items()},
        )
        return cls(params, meta)

    def train_config(self) -> TrainConfig:
        return TrainConfig.from_mapping(self.meta.config)

    def stats(self, kg: KnowledgeGraph) -> AttributeStats:
        return AttributeStats.from_list(self.meta.stats, kg.attributes)

    def check_graph(self, kg: KnowledgeGraph) -> None:
        """The graph must intern relations and attributes exactly as at training time."""
        if kg.relations.names != self.meta.relations or kg.attributes.names != self.meta.attributes:
            raise CheckpointError("checkpoint vocabularies do not match the loaded graph")

    def build_model(self, kg: KnowledgeGraph) -> ChainsFormer:
        """Fresh model over kg carrying this checkpoint's parameters."""
        self.check_graph(kg)
        model = ChainsFormer(kg, self.stats(kg), self.train_config())
        self.restore(model)
        return model

    def restore(self, model: ChainsFormer) -> None:
        """Write the stored parameters into a model of the same architecture."""
        named = dict(model.named_parameters())
        if set(named) != set(self.params):
            missing = sorted(set(named) ^ set(self.params))
            raise CheckpointError(f"parameter sets differ: {missing[:5]}")
        for name, param in named.items():
            array = self.params[name]
            if array.shape != param.shape:
                raise CheckpointError(f"{name}: stored shape {array.shape}, model shape {param.shape}")
            param.data = array.copy()
            param.zero_grad()

    def save(self, path: str | Path) -> Path:
        path = Path(path)
        path.parent.mkdir(parents=True, exist_ok=True)
        blobs = {PARAM_PREFIX + name: array for name, array in self.params.items()}
        blobs[META_KEY] = np.array(json.dumps(self.meta.dict(), sort_keys=True))
        with path.open("wb") as handle:
            np.savez(handle, **blobs)
        LOGGER.info("Wrote checkpoint %s (epoch %d)", path, self.meta.epoch)
        return path

    @classmethod
    def load(cls, path: str | Path) -> Checkpoint:
        path = Path(path)
        if not path.is_file():
            raise CheckpointError(f"no checkpoint at {path}")
        try:
            with np.load(path, allow_pickle=False) as data:
                meta = CheckpointMeta.parse_obj(json.loads(str(data[META_KEY])))
                params = {
                    key[len(PARAM_PREFIX) :]: np.array(data[key], dtype=np.float64)
                    for key in data.files
                    if key.startswith(PARAM_PREFIX)
                }
        except (OSError, ValueError, KeyError) as err:
            raise CheckpointError(f"unreadable checkpoint {path}: {err}") from err
        if meta.version != CHECKPOINT_VERSION:
            raise CheckpointError(f"unsupported checkpoint version {meta.version}")
        return cls(params, meta)
