"""Chain encoder: tokenization, sequence encoding and numerical-aware affine transfer"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from ..const import CHAIN_ENCODERS, VALUE_BITS, VALUE_ENCODINGS
from . import autodiff as ad
from .autodiff import Parameter, Tensor
from .exceptions import ConfigError, NonFiniteError, ShapeError
from .filter import FilterEmbeddings
from .nn import LSTM, MLP, Linear, Module, TransformerStack
from .retrieval import RAChain


def encode_value(value: float) -> np.ndarray:
    """The 64 IEEE-754 bits of a double, most significant first, as 0.0/1.0."""
    if not math.isfinite(value):
        raise NonFiniteError(f"cannot encode non-finite value {value!r}")
    raw = np.array([value], dtype=">f8").view(np.uint8)
    return np.unpackbits(raw).astype(np.float64)


def decode_value(bits: np.ndarray) -> float:
    """Exact inverse of encode_value."""
    bits = np.asarray(bits)
    if bits.shape != (VALUE_BITS,):
        raise ShapeError(f"expected {VALUE_BITS} bits, got shape {bits.shape}")
    return float(np.packbits(bits > 0.5).view(">f8")[0])


def encode_log_value(value: float) -> np.ndarray:
    """sign(n)·log1p(|n|) in the first slot, zeros elsewhere."""
    if not math.isfinite(value):
        raise NonFiniteError(f"cannot encode non-finite value {value!r}")
    code = np.zeros(VALUE_BITS)
    code[0] = math.copysign(math.log1p(abs(value)), value)
    return code


def value_codes(values: Sequence[float], encoding: str = "float64") -> np.ndarray:
    """Affine-net inputs for raw source values, shape (n, 64)."""
    if encoding not in VALUE_ENCODINGS:
        raise ConfigError(f"unknown value encoding {encoding!r}")
    encode = encode_value if encoding == "float64" else encode_log_value
    if not len(values):
        return np.zeros((0, VALUE_BITS))
    return np.stack([encode(float(v)) for v in values])


@dataclass
class ChainBatch:
    """Padded token rows for a set of chains.

    Row ids index the encoder token table: attributes, then relations, then the end
    token. Padding points at the end token and is masked out.
    """

    index: np.ndarray
    mask: np.ndarray
    end_position: np.ndarray
    lengths: np.ndarray

    def __len__(self) -> int:
        return int(self.index.shape[0])


def token_rows(chain: RAChain, attribute_count: int, relation_count: int) -> list[int]:
    """[a_p, r_l, ..., r_1, a_q, end] as token-table rows."""
    end = attribute_count + relation_count
    relations = [attribute_count + r for r in reversed(chain.relations)]
    return [chain.source_attribute, *relations, chain.query_attribute, end]


def batch_chains(
    chains: Sequence[RAChain], attribute_count: int, relation_count: int, max_hops: int
) -> ChainBatch:
    """Pad chains to max_hops + 3 tokens."""
    width = max_hops + 3
    end = attribute_count + relation_count
    index = np.full((len(chains), width), end, dtype=np.int64)
    mask = np.zeros((len(chains), width), dtype=bool)
    end_position = np.zeros(len(chains), dtype=np.int64)
    lengths = np.zeros(len(chains), dtype=np.int64)
    for i, chain in enumerate(chains):
        if not 1 <= chain.length <= max_hops:
            raise ConfigError(f"chain of length {chain.length} exceeds max_hops={max_hops}")
        rows = token_rows(chain, attribute_count, relation_count)
        index[i, : len(rows)] = rows
        mask[i, : len(rows)] = True
        end_position[i] = len(rows) - 1
        lengths[i] = chain.length
    return ChainBatch(index, mask, end_position, lengths)


@dataclass
class TokenSequence:
    """Token embeddings of one chain, shape (l + 3, d)."""

    rows: list[int]
    embeddings: Tensor

    def __len__(self) -> int:
        return len(self.rows)


class ChainEncoder(Module):
    """Maps token sequences to chain representations e_c."""

    def __init__(
        self,
        rng: np.random.Generator,
        filter_dim: int,
        dim: int,
        layers: int,
        heads: int,
        variant: str = "transformer",
    ) -> None:
        if variant not in CHAIN_ENCODERS:
            raise ConfigError(f"unknown chain encoder {variant!r}")
        self.dim = dim
        self.variant = variant
        self.lift = Linear(rng, filter_dim, dim, bias=False, name="encoder.lift") if filter_dim != dim else None
        self.end_token = Parameter(rng.normal(0.0, 0.1, size=dim), name="encoder.end_token")
        self.stack = None
        self.lstm = None
        if variant == "transformer":
            self.stack = TransformerStack(rng, dim, heads, layers, name="encoder.stack")
        elif variant == "lstm":
            self.lstm = LSTM(rng, dim, dim, name="encoder.lstm")

    def token_table(self, emb: FilterEmbeddings) -> Tensor:
        """All token embeddings at encoder width, end token last."""
        table = emb.token_table()
        if self.lift is not None:
            table = self.lift(table)
        return ad.concat([table, self.end_token.reshape(1, self.dim)], axis=0)

    def tokenize(self, chain: RAChain, emb: FilterEmbeddings) -> TokenSequence:
        emb._check(relations=chain.relations, attributes=(chain.source_attribute, chain.query_attribute))
        rows = token_rows(chain, emb.attribute_count, emb.relation_count)
        return TokenSequence(rows, self.token_table(emb)[np.asarray(rows)])

    def encode(self, seq: TokenSequence) -> Tensor:
        """e_c of a single token sequence, shape (d,)."""
        if len(seq) < 3:
            raise ShapeError("a token sequence has at least three tokens")
        x = seq.embeddings.reshape(1, len(seq), self.dim)
        mask = np.ones((1, len(seq)), dtype=bool)
        return self._run(x, mask, np.array([len(seq) - 1])).reshape(self.dim)

    def forward(self, batch: ChainBatch, emb: FilterEmbeddings) -> Tensor:
        """e_c for every chain of a batch, shape (n, d)."""
        x = self.token_table(emb)[batch.index]
        return self._run(x, batch.mask, batch.end_position)

    def _run(self, x: Tensor, mask: np.ndarray, end_position: np.ndarray) -> Tensor:
        rows = np.arange(x.shape[0])
        if self.variant == "transformer":
            return self.stack(x, mask)[rows, end_position]
        if self.variant == "lstm":
            return self.lstm(x, mask)
        weights = mask / mask.sum(axis=1, keepdims=True)
        return (x * weights[:, :, None]).sum(axis=1)


class AffineTransfer(Module):
    """Value-conditioned transform ẽ_c = (E^α)ᵀ e_c + E^β.

    E^α starts near the identity so early training sees ẽ_c ≈ e_c.
    """

    def __init__(self, rng: np.random.Generator, dim: int, hidden: int, init_scale: float = 1e-3) -> None:
        self.dim = dim
        self.alpha = MLP(rng, VALUE_BITS, hidden, dim * dim, name="affine.alpha")
        self.alpha.out.weight.data = rng.normal(0.0, init_scale, size=(hidden, dim * dim))
        self.alpha.out.bias.data = np.eye(dim).reshape(-1)
        self.beta = MLP(rng, VALUE_BITS, hidden, dim, name="affine.beta")
        self.beta.out.weight.data = rng.normal(0.0, init_scale, size=(hidden, dim))

    def matrices(self, codes: np.ndarray) -> tuple[Tensor, Tensor]:
        """(E^α, E^β) for a batch of value codes: shapes (n, d, d) and (n, d)."""
        codes = ad.Tensor(codes)
        alpha = self.alpha(codes).reshape(codes.shape[0], self.dim, self.dim)
        return alpha, self.beta(codes)

    def forward(self, reps: Tensor, codes: np.ndarray) -> Tensor:
        return affine_transfer(reps, *self.matrices(codes))


def affine_transfer(reps: Tensor, alpha: Tensor, beta: Tensor) -> Tensor:
    """Row-wise e_c E^α + E^β for reps (n, d), alpha (n, d, d), beta (n, d)."""
    n, dim = reps.shape
    return (reps.reshape(n, 1, dim) @ alpha).reshape(n, dim) + beta
