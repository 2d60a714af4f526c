"""Training coordinator for ChainsFormer."""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass
from pathlib import Path
from typing import Any, Mapping

import pandas as pd

from .const import (
    BEST_CHECKPOINT_FILE,
    CHECKPOINT_FILE,
    CONF_RELATIONAL_PATH,
    CONF_SEED,
    CONF_TEST_PATH,
    CONF_TRAIN_PATH,
    CONF_VALID_PATH,
    EPOCH_LOG_FILE,
    LOGGER,
)
from .engine.autodiff import Adam
from .engine.checkpoint import Checkpoint
from .engine.evaluation import evaluate
from .engine.exceptions import ConfigError, TrainingFault
from .engine.graph import DatasetSplit, KnowledgeGraph, compute_attribute_stats, load_dataset, queries_from
from .engine.model import ChainsFormer, TrainConfig
from .engine.training import TocCache, train_epoch


@dataclass
class TrainingData:
    """Per-epoch record kept by the TrainingCoordinator."""

    epoch: int
    train_loss: float
    mean_loss: float
    valid_mae: float | None
    valid_rmse: float | None
    skipped: int
    grad_norm: float
    best: bool = False


class TrainingCoordinator:
    """Class to manage the epoch loop, early stopping and checkpoints."""

    def __init__(
        self,
        kg: KnowledgeGraph,
        split: DatasetSplit,
        config: TrainConfig,
        run_config: Mapping[str, Any] | None = None,
        out_dir: str | Path | None = None,
        progress: bool = False,
    ) -> None:
        """Initialize coordinator."""
        if not split.train:
            raise TrainingFault("the training split is empty")
        self.kg = kg
        self.split = split
        self.config = config
        self.run_config = dict(run_config or {})
        self.out_dir = Path(out_dir) if out_dir is not None else None
        self.progress = progress
        self.stats = compute_attribute_stats(split.train, kg.attributes)
        self.model = ChainsFormer(kg, self.stats, config)
        self.optimizer = Adam(self.model.parameters(), config.learning_rate, grad_clip=config.grad_clip)
        self.train_queries = queries_from(split.train)
        self.valid_queries = queries_from(split.valid)
        self.toc_cache: TocCache | None = {} if config.cache_toc else None
        self.history: list[TrainingData] = []
        self.best: Checkpoint | None = None
        self.stop_reason = ""

    def _update_data(self, epoch: int) -> TrainingData:
        result = train_epoch(self.model, self.train_queries, self.optimizer, epoch, self.toc_cache, self.progress)
        if result.queries == 0:
            raise TrainingFault("no training query produced a chain; check max_hops and walks")
        valid_mae = valid_rmse = None
        if self.valid_queries:
            report = evaluate(self.model, self.valid_queries, name="valid")
            valid_mae, valid_rmse = report.average_mae, report.average_rmse
        return TrainingData(
            epoch=epoch,
            train_loss=result.loss,
            mean_loss=result.mean_loss,
            valid_mae=valid_mae,
            valid_rmse=valid_rmse,
            skipped=result.skipped,
            grad_norm=result.grad_norm,
        )

    def train(self) -> Checkpoint:
        """Train until the epoch cap, a loss plateau or validation patience runs out.

        The model is left holding the best checkpoint's parameters.
        """
        previous_loss: float | None = None
        best_metric = math.inf
        stale = 0
        self.stop_reason = "epoch limit"
        for epoch in range(self.config.epochs):
            data = self._update_data(epoch)
            metric = data.valid_mae if data.valid_mae is not None else data.mean_loss
            if metric < best_metric:
                best_metric, stale, data.best = metric, 0, True
                self.best = Checkpoint.capture(self.model, epoch, best_metric, self.run_config)
                if self.out_dir is not None:
                    self.best.save(self.out_dir / BEST_CHECKPOINT_FILE)
            else:
                stale += 1
            self.history.append(data)
            LOGGER.info(
                "Epoch %d: loss %.6g (mean %.6g), valid MAE* %s, skipped %d",
                epoch,
                data.train_loss,
                data.mean_loss,
                "n/a" if data.valid_mae is None else f"{data.valid_mae:.6g}",
                data.skipped,
            )
            self.write_history()

            if previous_loss is not None and abs(previous_loss - data.train_loss) < self.config.convergence_threshold:
                self.stop_reason = "loss change below threshold"
                break
            if stale > self.config.patience:
                self.stop_reason = f"no validation improvement for {stale} epochs"
                break
            previous_loss = data.train_loss

        LOGGER.info("Stopped after epoch %d: %s", self.history[-1].epoch, self.stop_reason)
        if self.best is None:
            self.best = Checkpoint.capture(self.model, self.history[-1].epoch, None, self.run_config)
        self.best.restore(self.model)
        if self.out_dir is not None:
            self.best.save(self.out_dir / CHECKPOINT_FILE)
        return self.best

    def history_frame(self) -> pd.DataFrame:
        return pd.DataFrame([asdict(data) for data in self.history])

    def write_history(self) -> None:
        """Per-epoch metrics log as CSV."""
        if self.out_dir is None:
            return
        self.out_dir.mkdir(parents=True, exist_ok=True)
        self.history_frame().to_csv(self.out_dir / EPOCH_LOG_FILE, index=False)


def fit(kg: KnowledgeGraph, split: DatasetSplit, config: TrainConfig, progress: bool = False) -> ChainsFormer:
    """Train a model in memory and return it holding its best parameters."""
    coordinator = TrainingCoordinator(kg, split, config, progress=progress)
    coordinator.train()
    return coordinator.model


def load_run_dataset(conf: Mapping[str, Any]) -> tuple[KnowledgeGraph, DatasetSplit]:
    """Dataset named by a run configuration."""
    if not conf.get(CONF_RELATIONAL_PATH) or not conf.get(CONF_TRAIN_PATH):
        raise ConfigError(f"{CONF_RELATIONAL_PATH} and {CONF_TRAIN_PATH} are required")
    return load_dataset(
        conf[CONF_RELATIONAL_PATH],
        conf[CONF_TRAIN_PATH],
        conf.get(CONF_VALID_PATH),
        conf.get(CONF_TEST_PATH),
        seed=conf.get(CONF_SEED, 0),
    )


def load_model(path: str | Path) -> tuple[ChainsFormer, DatasetSplit, Checkpoint]:
    """Rebuild a trained model and its dataset from a checkpoint file."""
    checkpoint = Checkpoint.load(path)
    kg, split = load_run_dataset(checkpoint.meta.config)
    return checkpoint.build_model(kg), split, checkpoint
