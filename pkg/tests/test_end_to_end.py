"""Scaled-down training runs on synthetic graphs; run with --runslow."""

from dataclasses import replace

import pytest

from chainsformer.coordinator import TrainingCoordinator
from chainsformer.engine.evaluation import ablation_variant, evaluate, train_mean_baseline
from chainsformer.engine.graph import load_dataset, queries_from
from chainsformer.engine.model import TrainConfig
from chainsformer.engine.reasoner import top_chain_report
from chainsformer.engine.synth import SynthSpec, generate

pytestmark = pytest.mark.slow

CONFIG = TrainConfig(
    epochs=50,
    learning_rate=1e-3,
    walks=128,
    top_k=16,
    max_hops=2,
    encoder_dim=32,
    filter_dim=32,
    layers=1,
    heads=4,
    affine_hidden=32,
    batch_size=32,
    patience=10,
    seed=0,
)


@pytest.fixture(scope="module")
def dataset(tmp_path_factory):
    paths = generate(SynthSpec(entities=500, distractor_relations=10, seed=0)).write(
        tmp_path_factory.mktemp("synth")
    )
    return load_dataset(paths["relational"], paths["train"], paths["valid"], paths["test"])


def _train(dataset, config):
    kg, split = dataset
    coordinator = TrainingCoordinator(kg, split, config)
    coordinator.train()
    return coordinator


def _test_mae(coordinator):
    return evaluate(coordinator.model, queries_from(coordinator.split.test), name="test").average_mae


@pytest.fixture(scope="module")
def trained(dataset):
    return _train(dataset, CONFIG)


def test_learns_the_planted_rule(trained):
    queries = queries_from(trained.split.test)
    baseline = train_mean_baseline(trained.kg, trained.stats, queries)
    mae = _test_mae(trained)
    assert mae < 0.02
    assert mae < 0.5 * baseline.average_mae


def test_generative_chain_is_the_key_chain(trained):
    traces = trained.model.predict(queries_from(trained.split.test))
    (top, *_) = top_chain_report(traces, attribute="target")
    assert (top.source_attribute, top.relations) == ("source", ["r_a", "r_b"])


def test_scaling_beats_translation_on_a_multiplicative_rule(dataset, trained):
    translation = _train(dataset, replace(CONFIG, projection="translation"))
    assert _test_mae(trained) < _test_mae(translation)


@pytest.mark.parametrize("key", ["w/o_numerical_projection", "w/o_chain_weighting", "w/o_hyperbolic_filter"])
def test_full_model_beats_the_ablation(dataset, trained, key):
    ablated = _train(dataset, ablation_variant(key).apply_fn(CONFIG))
    assert _test_mae(trained) < _test_mae(ablated)
