"""Tests for the assembled ChainsFormer model."""

from dataclasses import replace

import numpy as np
import pytest

from chainsformer.engine.exceptions import ConfigError
from chainsformer.engine.graph import NumericalTriple, Query, compute_attribute_stats
from chainsformer.engine.model import ChainsFormer, TrainConfig, query_seed


def known_triples(kg):
    return [NumericalTriple(e, a, v) for e, row in enumerate(kg.numerical_index) for a, v in row]


def chain_model(kg, config):
    return ChainsFormer(kg, compute_attribute_stats(known_triples(kg), kg.attributes), config)


def _query(kg, entity, attribute, target=None):
    return Query(kg.entities.id(entity), kg.attributes.id(attribute), target)


def test_trace_weights_form_a_sorted_distribution(chain_graph, tiny_config):
    model = chain_model(chain_graph, tiny_config)
    (trace,) = model.predict([_query(chain_graph, "C", "x", 2.0)])
    weights = [chain.weight for chain in trace.chains]
    assert not trace.fallback
    assert (trace.entity, trace.attribute, trace.target) == ("C", "x", 2.0)
    assert sum(weights) == pytest.approx(1.0)
    assert weights == sorted(weights, reverse=True)
    assert trace.enhanced_size == len(trace.chains) <= tiny_config.top_k
    assert trace.toc_size >= trace.enhanced_size
    assert 1.0 <= trace.prediction <= 7.0
    assert trace.top_chain() == trace.chains[0]


def test_fallback_to_training_mean(chain_graph, tiny_config):
    model = chain_model(chain_graph, tiny_config)
    isolated, degenerate = model.predict([_query(chain_graph, "Z", "x"), _query(chain_graph, "C", "y")])
    assert isolated.fallback and isolated.prediction == pytest.approx(3.5)
    assert isolated.toc_size == 0
    assert degenerate.fallback and degenerate.prediction == pytest.approx(10.0)
    assert degenerate.chains == []


def test_predictions_do_not_depend_on_batching(tiny_model, synthetic_dataset):
    _, split = synthetic_dataset
    queries = [Query(t.entity, t.attribute, t.value) for t in split.test[:12]]
    together = [trace.prediction for trace in tiny_model.predict(queries)]
    one_by_one = [trace.prediction for trace in tiny_model.predict(queries, batch_size=1)]
    reversed_order = [trace.prediction for trace in tiny_model.predict(queries[::-1])][::-1]
    np.testing.assert_allclose(one_by_one, together, rtol=1e-9, atol=1e-12)
    np.testing.assert_allclose(reversed_order, together, rtol=1e-9, atol=1e-12)


def test_retrieval_is_seeded_per_query(chain_graph, tiny_config):
    model = chain_model(chain_graph, tiny_config)
    query = _query(chain_graph, "C", "x")
    assert model.retrieve(query) == model.retrieve(query)
    assert query_seed(0, 1, query) != query_seed(0, 2, query)
    assert query_seed(0, 1, query, salt=1) != query_seed(0, 1, query)


def test_forward_batches_queries(chain_graph, tiny_config):
    model = chain_model(chain_graph, tiny_config)
    enhanced = [
        model.select(model.retrieve(_query(chain_graph, "C", "x"))),
        model.select(model.retrieve(_query(chain_graph, "A", "x"))),
    ]
    output = model(enhanced)
    assert output.prediction.shape == (2,)
    assert output.mask.sum(axis=1).tolist() == [len(item) for item in enhanced]
    assert np.all((output.prediction.data >= 0.0) & (output.prediction.data <= 1.0))
    np.testing.assert_allclose(output.weights.data.sum(axis=1), 1.0)


@pytest.mark.parametrize(
    "changes",
    [
        {"filter_space": "euclidean"},
        {"filter_space": "random"},
        {"chain_encoder": "mean"},
        {"chain_encoder": "lstm"},
        {"numerical_aware": False},
        {"chain_weighting": False},
        {"projection": "translation"},
        {"projection": "combined"},
        {"projection": "direct"},
        {"value_encoding": "log"},
        {"same_attribute_only": True},
        {"encoder_dim": 4},
    ],
)
def test_variants_predict_within_range(chain_graph, tiny_config, changes):
    config = replace(tiny_config, **changes)
    model = chain_model(chain_graph, config)
    (trace,) = model.predict([_query(chain_graph, "C", "x")])
    assert 1.0 <= trace.prediction <= 7.0
    if not config.numerical_aware:
        assert model.affine is None
    if not config.chain_weighting:
        assert model.treeformer is None
        assert len({round(chain.weight, 12) for chain in trace.chains}) == 1


@pytest.mark.parametrize(
    "changes",
    [
        {"top_k": 17},
        {"lam": 1.5},
        {"heads": 3},
        {"epochs": 0},
        {"curvature": 0.0},
        {"projection": "rotation"},
        {"loss": "huber"},
        {"filter_space": "spherical"},
    ],
)
def test_config_validation(tiny_config, changes):
    with pytest.raises(ConfigError):
        replace(tiny_config, **changes)


def test_config_mapping_uses_lambda_key(tiny_config):
    mapping = tiny_config.to_mapping()
    assert mapping["lambda"] == tiny_config.lam
    assert "lam" not in mapping
    assert TrainConfig.from_mapping(mapping) == tiny_config
    assert TrainConfig.from_mapping({"lambda": 0.2, "walks": None}).lam == 0.2
    assert TrainConfig.from_mapping({"unrelated": 1}) == TrainConfig()
