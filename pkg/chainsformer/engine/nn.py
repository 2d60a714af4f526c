"""Neural network blocks on top of the autodiff tape"""

from __future__ import annotations

import math
from typing import Iterator

import numpy as np

from . import autodiff as ad
from .autodiff import Parameter, Tensor
from .exceptions import ConfigError


class Module:
    """Base class: parameters are discovered from instance attributes."""

    def named_parameters(self, prefix: str = "") -> Iterator[tuple[str, Parameter]]:
        """Yield (dotted name, parameter) in attribute definition order."""
        for key, value in vars(self).items():
            yield from _named(value, f"{prefix}{key}")

    def parameters(self) -> list[Parameter]:
        return [p for _, p in self.named_parameters()]

    def zero_grad(self) -> None:
        for p in self.parameters():
            p.zero_grad()

    def __call__(self, *args, **kwargs):
        return self.forward(*args, **kwargs)

    def forward(self, *args, **kwargs):
        raise NotImplementedError


def _named(value: object, name: str) -> Iterator[tuple[str, Parameter]]:
    if isinstance(value, Parameter):
        yield name, value
    elif isinstance(value, Module):
        yield from value.named_parameters(name + ".")
    elif isinstance(value, (list, tuple)):
        for i, item in enumerate(value):
            yield from _named(item, f"{name}.{i}")


def xavier(rng: np.random.Generator, fan_in: int, fan_out: int) -> np.ndarray:
    """Glorot-uniform initial weights of shape (fan_in, fan_out)."""
    bound = math.sqrt(6.0 / (fan_in + fan_out))
    return rng.uniform(-bound, bound, size=(fan_in, fan_out))


class Linear(Module):
    """y = x W + b over the last axis."""

    def __init__(
        self, rng: np.random.Generator, in_features: int, out_features: int, bias: bool = True, name: str = ""
    ) -> None:
        self.in_features = in_features
        self.out_features = out_features
        self.weight = Parameter(xavier(rng, in_features, out_features), name=f"{name}.weight")
        self.bias = Parameter(np.zeros(out_features), name=f"{name}.bias") if bias else None

    def forward(self, x: Tensor) -> Tensor:
        lead = x.shape[:-1]
        flat = x.reshape(-1, self.in_features) if x.ndim != 2 else x
        out = flat @ self.weight
        if self.bias is not None:
            out = out + self.bias
        return out.reshape(*lead, self.out_features) if x.ndim != 2 else out


class MLP(Module):
    """Linear - ReLU - Linear."""

    def __init__(
        self, rng: np.random.Generator, in_features: int, hidden: int, out_features: int, name: str = ""
    ) -> None:
        self.hidden = Linear(rng, in_features, hidden, name=f"{name}.hidden")
        self.out = Linear(rng, hidden, out_features, name=f"{name}.out")

    def forward(self, x: Tensor) -> Tensor:
        return self.out(ad.relu(self.hidden(x)))


class LayerNorm(Module):
    def __init__(self, width: int, eps: float = 1e-5, bias: bool = True, name: str = "") -> None:
        self.eps = eps
        self.gain = Parameter(np.ones(width), name=f"{name}.gain")
        self.bias = Parameter(np.zeros(width), name=f"{name}.bias") if bias else None
        self._zero = Tensor(np.zeros(width))

    def forward(self, x: Tensor) -> Tensor:
        return ad.layer_norm(x, self.gain, self._zero if self.bias is None else self.bias, self.eps)


class MultiHeadSelfAttention(Module):
    """Scaled dot-product self-attention with key padding masks.

    Scores are divided by √d of the model width. The last attention map is kept in
    ``last_attention`` with shape (batch, heads, query, key).
    """

    def __init__(self, rng: np.random.Generator, width: int, heads: int, name: str = "") -> None:
        if heads < 1 or width % heads:
            raise ConfigError(f"heads ({heads}) must divide the model width ({width})")
        self.width = width
        self.heads = heads
        self.query = Linear(rng, width, width, bias=False, name=f"{name}.query")
        self.key = Linear(rng, width, width, bias=False, name=f"{name}.key")
        self.value = Linear(rng, width, width, bias=False, name=f"{name}.value")
        self.output = Linear(rng, width, width, name=f"{name}.output")
        self.last_attention: np.ndarray | None = None

    def _split(self, x: Tensor, batch: int, length: int) -> Tensor:
        return x.reshape(batch, length, self.heads, self.width // self.heads).transpose(0, 2, 1, 3)

    def forward(self, x: Tensor, key_mask: np.ndarray | None = None) -> Tensor:
        batch, length, _ = x.shape
        q = self._split(self.query(x), batch, length)
        k = self._split(self.key(x), batch, length)
        v = self._split(self.value(x), batch, length)
        scores = (q @ k.swapaxes(-1, -2)) * (1.0 / math.sqrt(self.width))
        mask = None if key_mask is None else np.asarray(key_mask, dtype=bool)[:, None, None, :]
        attention = ad.softmax(scores, axis=-1, mask=mask)
        self.last_attention = attention.data
        mixed = (attention @ v).transpose(0, 2, 1, 3).reshape(batch, length, self.width)
        return self.output(mixed)


class TransformerLayer(Module):
    """Self-attention and feed-forward sublayers, each residual then layer-normalized."""

    def __init__(
        self, rng: np.random.Generator, width: int, heads: int, ffn_width: int, output_bias: bool = True, name: str = ""
    ) -> None:
        self.attention = MultiHeadSelfAttention(rng, width, heads, name=f"{name}.attention")
        self.norm_attention = LayerNorm(width, name=f"{name}.norm_attention")
        self.feed_forward = MLP(rng, width, ffn_width, width, name=f"{name}.feed_forward")
        self.norm_feed_forward = LayerNorm(width, bias=output_bias, name=f"{name}.norm_feed_forward")

    def forward(self, x: Tensor, key_mask: np.ndarray | None = None) -> Tensor:
        x = self.norm_attention(x + self.attention(x, key_mask))
        return self.norm_feed_forward(x + self.feed_forward(x))


class TransformerStack(Module):
    """L encoder-only Transformer layers without positional encoding."""

    def __init__(
        self,
        rng: np.random.Generator,
        width: int,
        heads: int,
        layers: int,
        ffn_width: int | None = None,
        output_bias: bool = True,
        name: str = "",
    ) -> None:
        """``output_bias=False`` drops the shift of the last norm, for outputs read through a softmax."""
        if layers < 1:
            raise ConfigError("a Transformer stack needs at least one layer")
        ffn_width = ffn_width or 2 * width
        self.layers = [
            TransformerLayer(
                rng, width, heads, ffn_width, output_bias=output_bias or i < layers - 1, name=f"{name}.layers.{i}"
            )
            for i in range(layers)
        ]

    def forward(self, x: Tensor, key_mask: np.ndarray | None = None) -> Tensor:
        for layer in self.layers:
            x = layer(x, key_mask)
        return x

    def attention_maps(self) -> list[np.ndarray]:
        """Attention probabilities of the last forward pass, one per layer."""
        return [layer.attention.last_attention for layer in self.layers]


class LSTM(Module):
    """Single-layer LSTM; padded steps carry the previous state forward unchanged."""

    def __init__(self, rng: np.random.Generator, in_features: int, hidden: int, name: str = "") -> None:
        self.hidden = hidden
        self.gates = Linear(rng, in_features + hidden, 4 * hidden, name=f"{name}.gates")
        self.gates.bias.data[hidden : 2 * hidden] = 1.0

    def forward(self, x: Tensor, mask: np.ndarray) -> Tensor:
        """Return the final hidden state, shape (batch, hidden)."""
        batch, length, _ = x.shape
        h = ad.Tensor(np.zeros((batch, self.hidden)))
        c = ad.Tensor(np.zeros((batch, self.hidden)))
        size = self.hidden
        for t in range(length):
            step = ad.Tensor(np.asarray(mask[:, t], dtype=np.float64)[:, None])
            z = self.gates(ad.concat([x[:, t, :], h], axis=-1))
            i = ad.sigmoid(z[:, :size])
            f = ad.sigmoid(z[:, size : 2 * size])
            g = ad.tanh(z[:, 2 * size : 3 * size])
            o = ad.sigmoid(z[:, 3 * size :])
            c_new = f * c + i * g
            h_new = o * ad.tanh(c_new)
            c = step * c_new + (1.0 - step) * c
            h = step * h_new + (1.0 - step) * h
        return h
