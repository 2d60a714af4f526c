"""Fixtures for ChainsFormer tests."""

from __future__ import annotations

import pytest

from chainsformer.engine.graph import compute_attribute_stats, load_dataset
from chainsformer.engine.model import ChainsFormer, TrainConfig
from chainsformer.engine.synth import SynthSpec, generate

from .helpers import make_graph

CHAIN_EDGES = [("A", "r1", "B"), ("B", "r2", "C"), ("D", "r3", "C")]
CHAIN_VALUES = [("A", "x", 1.0), ("B", "y", 10.0), ("D", "x", 4.0), ("C", "x", 2.0), ("Z", "x", 7.0)]


def pytest_addoption(parser):
    parser.addoption("--runslow", action="store_true", default=False, help="run slow end-to-end tests")


def pytest_configure(config):
    config.addinivalue_line("markers", "slow: scaled-down experiments, run with --runslow")


def pytest_collection_modifyitems(config, items):
    if config.getoption("--runslow"):
        return
    skip_slow = pytest.mark.skip(reason="needs --runslow")
    for item in items:
        if "slow" in item.keywords:
            item.add_marker(skip_slow)


@pytest.fixture
def chain_graph():
    """A -r1-> B -r2-> C <-r3- D plus an isolated Z; y is only known on B."""
    return make_graph(CHAIN_EDGES, CHAIN_VALUES)


@pytest.fixture
def star_graph():
    """Hub H linked to five spokes S0..S4; every entity carries val."""
    edges = [("H", "link", f"S{i}") for i in range(5)]
    values = [(f"S{i}", "val", float(i)) for i in range(5)] + [("H", "val", 2.5)]
    return make_graph(edges, values)


@pytest.fixture
def tiny_config():
    return TrainConfig(
        epochs=3,
        learning_rate=1e-3,
        walks=16,
        top_k=4,
        max_hops=2,
        encoder_dim=8,
        filter_dim=4,
        layers=1,
        heads=2,
        affine_hidden=8,
        batch_size=8,
        seed=0,
    )


@pytest.fixture
def synthetic_files(tmp_path):
    """Small synthetic graph written to disk; returns the paths by role."""
    return generate(SynthSpec(entities=60, distractor_relations=3, seed=0)).write(tmp_path / "synth")


@pytest.fixture
def synthetic_dataset(synthetic_files):
    return load_dataset(
        synthetic_files["relational"],
        synthetic_files["train"],
        synthetic_files["valid"],
        synthetic_files["test"],
    )


@pytest.fixture
def tiny_model(synthetic_dataset, tiny_config):
    kg, split = synthetic_dataset
    return ChainsFormer(kg, compute_attribute_stats(split.train, kg.attributes), tiny_config)
