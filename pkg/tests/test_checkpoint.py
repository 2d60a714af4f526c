"""Tests for checkpoint save and load."""

from dataclasses import replace

import numpy as np
import pytest

from chainsformer.engine.checkpoint import Checkpoint
from chainsformer.engine.exceptions import CheckpointError
from chainsformer.engine.graph import queries_from

from .helpers import make_graph


def test_round_trip_restores_predictions(tmp_path, tiny_model, synthetic_dataset):
    kg, split = synthetic_dataset
    for param in tiny_model.parameters():
        param.data = param.data * 0.9
    path = Checkpoint.capture(tiny_model, epoch=4, best_metric=0.25, run_config={"out": "x"}).save(
        tmp_path / "model.npz"
    )

    loaded = Checkpoint.load(path)
    assert loaded.meta.epoch == 4
    assert loaded.meta.best_metric == 0.25
    assert loaded.meta.config["out"] == "x"
    assert loaded.train_config() == tiny_model.config

    model = loaded.build_model(kg)
    for (name, original), (_, restored) in zip(tiny_model.named_parameters(), model.named_parameters()):
        np.testing.assert_array_equal(original.data, restored.data, err_msg=name)
    queries = queries_from(split.test)[:5]
    expected = [trace.prediction for trace in tiny_model.predict(queries)]
    assert [trace.prediction for trace in model.predict(queries)] == expected
    assert model.stats.as_list() == tiny_model.stats.as_list()


def test_missing_and_unreadable_files(tmp_path):
    with pytest.raises(CheckpointError):
        Checkpoint.load(tmp_path / "absent.npz")
    garbage = tmp_path / "garbage.npz"
    garbage.write_bytes(b"definitely not a checkpoint")
    with pytest.raises(CheckpointError):
        Checkpoint.load(garbage)
    no_meta = tmp_path / "no_meta.npz"
    with no_meta.open("wb") as handle:
        np.savez(handle, **{"param.x": np.zeros(2)})
    with pytest.raises(CheckpointError):
        Checkpoint.load(no_meta)


def test_version_mismatch(tmp_path, tiny_model):
    checkpoint = Checkpoint.capture(tiny_model, epoch=0)
    checkpoint.meta.version = 99
    path = checkpoint.save(tmp_path / "future.npz")
    with pytest.raises(CheckpointError):
        Checkpoint.load(path)


def test_vocabulary_mismatch(tiny_model):
    other = make_graph([("a", "unrelated", "b")], [("a", "size", 1.0)])
    with pytest.raises(CheckpointError):
        Checkpoint.capture(tiny_model, epoch=0).build_model(other)


def test_parameter_mismatch(tiny_model, synthetic_dataset):
    kg, _ = synthetic_dataset
    checkpoint = Checkpoint.capture(tiny_model, epoch=0)
    trimmed = Checkpoint(dict(list(checkpoint.params.items())[1:]), checkpoint.meta)
    with pytest.raises(CheckpointError):
        trimmed.restore(tiny_model)

    reshaped = dict(checkpoint.params)
    name = next(iter(reshaped))
    reshaped[name] = np.zeros(3)
    with pytest.raises(CheckpointError):
        Checkpoint(reshaped, checkpoint.meta).restore(tiny_model)

    no_affine = replace(tiny_model.config, numerical_aware=False)
    meta = checkpoint.meta.copy(update={"config": {**checkpoint.meta.config, "numerical_aware": False}})
    assert Checkpoint(checkpoint.params, meta).train_config() == no_affine
    with pytest.raises(CheckpointError):
        Checkpoint(checkpoint.params, meta).build_model(kg)
