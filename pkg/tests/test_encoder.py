"""Tests for value codes, tokenization and the chain encoder."""

import struct

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from numpy.testing import assert_allclose

from chainsformer.const import CHAIN_ENCODERS
from chainsformer.engine import autodiff as ad
from chainsformer.engine.autodiff import Parameter, Tensor, gradient_check
from chainsformer.engine.encoder import (
    AffineTransfer,
    ChainEncoder,
    batch_chains,
    decode_value,
    encode_log_value,
    encode_value,
    token_rows,
    value_codes,
)
from chainsformer.engine.exceptions import ConfigError, NonFiniteError, ShapeError
from chainsformer.engine.filter import FilterEmbeddings
from chainsformer.engine.retrieval import RAChain

CHAINS = [
    RAChain(0, (0, 1), 0, 1.0, (0, 1, 2)),
    RAChain(1, (1,), 0, 10.0, (1, 2)),
    RAChain(0, (2,), 0, 4.0, (3, 2)),
]


def _ieee_bits(value):
    raw = struct.pack(">d", value)
    return [int(bit) for byte in raw for bit in f"{byte:08b}"]


@pytest.fixture
def rng():
    return np.random.default_rng(11)


@pytest.fixture
def emb(rng):
    return FilterEmbeddings(rng, relations=6, attributes=2, dim=4)


@pytest.mark.parametrize("value", [0.0, 1.0, -2.0, 6.02e23, -1e-300])
def test_value_bits_match_ieee(value):
    bits = encode_value(value)
    assert bits.shape == (64,)
    assert bits.tolist() == _ieee_bits(value)
    assert decode_value(bits) == value


def test_value_round_trip_on_random_doubles():
    rng = np.random.default_rng(0)
    values = rng.normal(size=10_000) * 10.0 ** rng.integers(-30, 30, size=10_000)
    decoded = [decode_value(code) for code in value_codes(values)]
    assert decoded == values.tolist()


@given(st.floats(allow_nan=False, allow_infinity=False), st.floats(allow_nan=False, allow_infinity=False))
def test_distinct_values_get_distinct_codes(a, b):
    if struct.pack(">d", a) != struct.pack(">d", b):
        assert not np.array_equal(encode_value(a), encode_value(b))


def test_value_code_errors():
    for bad in (float("nan"), float("inf")):
        with pytest.raises(NonFiniteError):
            encode_value(bad)
        with pytest.raises(NonFiniteError):
            encode_log_value(bad)
    with pytest.raises(ShapeError):
        decode_value(np.zeros(32))
    with pytest.raises(ConfigError):
        value_codes([1.0], encoding="decimal")
    assert value_codes([]).shape == (0, 64)


def test_log_encoding():
    code = encode_log_value(-99.0)
    assert code[0] == pytest.approx(-np.log(100.0))
    assert np.all(code[1:] == 0.0)
    assert_allclose(value_codes([0.0, np.e - 1], encoding="log")[:, 0], [0.0, 1.0])


def test_token_rows_put_relations_in_reverse():
    chain = RAChain(1, (0, 5), 0, 1.0, (0, 1, 2))
    assert token_rows(chain, attribute_count=2, relation_count=6) == [1, 2 + 5, 2 + 0, 0, 8]


def test_batch_padding():
    batch = batch_chains(CHAINS, attribute_count=2, relation_count=6, max_hops=3)
    assert batch.index.shape == (3, 6)
    assert batch.mask.sum(axis=1).tolist() == [5, 4, 4]
    assert batch.end_position.tolist() == [4, 3, 3]
    assert batch.lengths.tolist() == [2, 1, 1]
    assert np.all(batch.index[~batch.mask] == 8)
    with pytest.raises(ConfigError):
        batch_chains(CHAINS, 2, 6, max_hops=1)


@pytest.mark.parametrize("variant", CHAIN_ENCODERS)
def test_encoder_shapes_and_batch_independence(rng, emb, variant):
    encoder = ChainEncoder(rng, filter_dim=4, dim=8, layers=1, heads=2, variant=variant)
    together = encoder(batch_chains(CHAINS, 2, 6, max_hops=3), emb).data
    assert together.shape == (3, 8)
    for i, chain in enumerate(CHAINS):
        alone = encoder(batch_chains([chain], 2, 6, max_hops=3), emb).data[0]
        assert_allclose(alone, together[i], atol=1e-9)
        single = encoder.encode(encoder.tokenize(chain, emb)).data
        assert_allclose(single, together[i], atol=1e-9)


def test_encoder_rejects_unknown_variant(rng):
    with pytest.raises(ConfigError):
        ChainEncoder(rng, 4, 8, 1, 2, variant="gru")
    assert ChainEncoder(rng, 8, 8, 1, 2).lift is None


def test_gradients_reach_the_filter_embeddings(rng, emb):
    encoder = ChainEncoder(rng, filter_dim=4, dim=8, layers=1, heads=2)
    out = encoder(batch_chains(CHAINS, 2, 6, max_hops=2), emb)
    ad.backward((out * rng.normal(size=out.shape)).sum())
    used = sorted({r for chain in CHAINS for r in chain.relations})
    assert np.all(np.abs(emb.relation_embeddings.grad[used]).sum(axis=1) > 0)
    assert np.abs(emb.attribute_embeddings.grad).sum() > 0
    assert np.abs(encoder.end_token.grad).max() > 0


def test_affine_transfer_starts_near_identity(rng):
    affine = AffineTransfer(rng, dim=8, hidden=16)
    reps = Tensor(rng.normal(size=(5, 8)))
    codes = value_codes([0.5, 3.0, -7.0, 1e6, 0.0])
    assert_allclose(affine(reps, codes).data, reps.data, atol=0.05)


def test_affine_transfer_gradients(rng):
    affine = AffineTransfer(rng, dim=3, hidden=4, init_scale=0.1)
    reps = Parameter(rng.normal(size=(2, 3)), name="reps")
    codes = value_codes([1.5, -4.0])
    direction = rng.normal(size=(2, 3))
    params = [reps, *affine.parameters()]
    assert gradient_check(lambda: (affine(reps, codes) * direction).sum(), params) < 1e-4
