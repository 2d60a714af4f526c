"""Tests for the neural network blocks."""

import numpy as np
import pytest
from numpy.testing import assert_allclose

from chainsformer.engine.autodiff import Parameter, Tensor, gradient_check
from chainsformer.engine.exceptions import ConfigError
from chainsformer.engine.nn import LSTM, MLP, Linear, MultiHeadSelfAttention, TransformerLayer, TransformerStack

TOLERANCE = 1e-4


@pytest.fixture
def rng():
    return np.random.default_rng(7)


def test_named_parameters_are_unique_and_dotted(rng):
    stack = TransformerStack(rng, 8, 2, 2)
    names = [name for name, _ in stack.named_parameters()]
    assert len(names) == len(set(names))
    assert "layers.0.attention.query.weight" in names
    assert "layers.1.norm_feed_forward.gain" in names
    assert len(stack.parameters()) == len(names)


def test_output_bias_only_drops_the_last_norm_shift(rng):
    names = [name for name, _ in TransformerStack(rng, 8, 2, 2, output_bias=False).named_parameters()]
    assert "layers.0.norm_feed_forward.bias" in names
    assert "layers.1.norm_feed_forward.bias" not in names
    assert "layers.1.norm_attention.bias" in names


def test_linear_keeps_leading_axes(rng):
    layer = Linear(rng, 4, 3)
    assert layer(Tensor(np.ones((2, 5, 4)))).shape == (2, 5, 3)
    assert layer(Tensor(np.ones((6, 4)))).shape == (6, 3)
    assert Linear(rng, 4, 3, bias=False).bias is None


def test_heads_must_divide_width(rng):
    with pytest.raises(ConfigError):
        MultiHeadSelfAttention(rng, 10, 4)
    with pytest.raises(ConfigError):
        TransformerStack(rng, 8, 2, 0)


def test_attention_ignores_padded_keys(rng):
    attention = MultiHeadSelfAttention(rng, 8, 2)
    x = Tensor(rng.normal(size=(2, 4, 8)))
    mask = np.array([[True, True, True, False], [True, True, False, False]])
    attention(x, mask)
    probabilities = attention.last_attention
    assert probabilities.shape == (2, 2, 4, 4)
    assert np.all(probabilities[0, :, :, 3] == 0.0)
    assert np.all(probabilities[1, :, :, 2:] == 0.0)
    assert_allclose(probabilities.sum(axis=-1), 1.0)

    changed = x.data.copy()
    changed[0, 3] = 100.0
    out = attention(x, mask).data
    out_changed = attention(Tensor(changed), mask).data
    assert_allclose(out[0, :3], out_changed[0, :3], atol=1e-12)


def test_attention_gradients(rng):
    attention = MultiHeadSelfAttention(rng, 8, 2)
    x = Parameter(rng.normal(size=(2, 3, 8)), name="x")
    mask = np.array([[True, True, True], [True, True, False]])
    direction = rng.normal(size=(2, 3, 8))
    params = [x, *attention.parameters()]
    assert gradient_check(lambda: (attention(x, mask) * direction).sum(), params) < TOLERANCE


def test_transformer_layer_gradients(rng):
    layer = TransformerLayer(rng, 4, 2, 8)
    x = Parameter(rng.normal(size=(1, 3, 4)), name="x")
    direction = rng.normal(size=(1, 3, 4))
    assert gradient_check(lambda: (layer(x) * direction).sum(), [x, *layer.parameters()]) < TOLERANCE


def test_stack_is_permutation_equivariant(rng):
    stack = TransformerStack(rng, 8, 2, 2)
    x = rng.normal(size=(1, 5, 8))
    perm = rng.permutation(5)
    out = stack(Tensor(x)).data
    out_perm = stack(Tensor(x[:, perm])).data
    assert_allclose(out_perm, out[:, perm], atol=1e-9)
    assert len(stack.attention_maps()) == 2


def test_mlp_shape(rng):
    mlp = MLP(rng, 3, 5, 2)
    assert mlp(Tensor(np.ones((4, 3)))).shape == (4, 2)


def test_lstm_carries_state_over_padding(rng):
    lstm = LSTM(rng, 4, 6)
    x = rng.normal(size=(1, 3, 4))
    padded = np.concatenate([x, rng.normal(size=(1, 2, 4))], axis=1)
    short = lstm(Tensor(x), np.ones((1, 3), dtype=bool)).data
    long = lstm(Tensor(padded), np.array([[True, True, True, False, False]])).data
    assert short.shape == (1, 6)
    assert_allclose(short, long, atol=1e-12)


def test_lstm_gradients(rng):
    lstm = LSTM(rng, 3, 4)
    x = Parameter(rng.normal(size=(2, 3, 3)), name="x")
    mask = np.array([[True, True, True], [True, True, False]])
    direction = rng.normal(size=(2, 4))
    assert gradient_check(lambda: (lstm(x, mask) * direction).sum(), [x, *lstm.parameters()]) < TOLERANCE
