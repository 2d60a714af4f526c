"""Reverse-mode automatic differentiation over float64 numpy arrays.

Every op that sees an input requiring gradients records its parents and a
backward closure on the output tensor; ``backward`` replays that tape in reverse
topological order and accumulates gradients into the leaves.
"""

from __future__ import annotations

import contextlib
from typing import Callable, Iterable, Iterator, Sequence

import numpy as np

from .exceptions import NonFiniteError, ShapeError, TrainingFault
from .hyperbolic import project_array

BackwardFn = Callable[[np.ndarray], Sequence["np.ndarray | None"]]

_GRAD_ENABLED = True


@contextlib.contextmanager
def no_grad() -> Iterator[None]:
    """Run ops without recording them."""
    global _GRAD_ENABLED
    previous = _GRAD_ENABLED
    _GRAD_ENABLED = False
    try:
        yield
    finally:
        _GRAD_ENABLED = previous


class Tensor:
    """Array value plus the tape entry that produced it."""

    __slots__ = ("data", "grad", "requires_grad", "_parents", "_backward", "op")

    def __init__(
        self,
        data: np.ndarray | float | Sequence[float],
        requires_grad: bool = False,
        parents: tuple[Tensor, ...] = (),
        backward: BackwardFn | None = None,
        op: str = "",
    ) -> None:
        self.data = np.asarray(data, dtype=np.float64)
        self.grad: np.ndarray | None = None
        self.requires_grad = requires_grad
        self._parents = parents
        self._backward = backward
        self.op = op

    def __repr__(self) -> str:
        return f"Tensor(shape={self.shape}, op={self.op or 'leaf'}, requires_grad={self.requires_grad})"

    @property
    def shape(self) -> tuple[int, ...]:
        return self.data.shape

    @property
    def ndim(self) -> int:
        return self.data.ndim

    def item(self) -> float:
        """Python float of a one-element tensor."""
        return float(self.data.reshape(-1)[0])

    def detach(self) -> Tensor:
        """Same values, cut from the tape."""
        return Tensor(self.data)

    def zero_grad(self) -> None:
        self.grad = None

    # arithmetic
    def __add__(self, other: Tensor | float) -> Tensor:
        return add(self, other)

    __radd__ = __add__

    def __sub__(self, other: Tensor | float) -> Tensor:
        return add(self, neg(as_tensor(other)))

    def __rsub__(self, other: Tensor | float) -> Tensor:
        return add(as_tensor(other), neg(self))

    def __mul__(self, other: Tensor | float) -> Tensor:
        return mul(self, other)

    __rmul__ = __mul__

    def __truediv__(self, other: Tensor | float) -> Tensor:
        return div(self, other)

    def __rtruediv__(self, other: Tensor | float) -> Tensor:
        return div(as_tensor(other), self)

    def __neg__(self) -> Tensor:
        return neg(self)

    def __matmul__(self, other: Tensor) -> Tensor:
        return matmul(self, other)

    def __getitem__(self, index) -> Tensor:
        return take(self, index)

    def sum(self, axis: int | tuple[int, ...] | None = None, keepdims: bool = False) -> Tensor:
        return reduce_sum(self, axis, keepdims)

    def mean(self, axis: int | tuple[int, ...] | None = None, keepdims: bool = False) -> Tensor:
        return reduce_mean(self, axis, keepdims)

    def reshape(self, *shape: int) -> Tensor:
        if len(shape) == 1 and isinstance(shape[0], (tuple, list)):
            shape = tuple(shape[0])
        return reshape(self, shape)

    def transpose(self, *axes: int) -> Tensor:
        return transpose(self, axes or None)

    def swapaxes(self, a: int, b: int) -> Tensor:
        axes = list(range(self.ndim))
        axes[a], axes[b] = axes[b], axes[a]
        return transpose(self, tuple(axes))

    def backward(self) -> None:
        backward(self)


class Parameter(Tensor):
    """Learnable tensor with its adaptive-moment state.

    ``curvature`` is set for Poincaré-ball parameters, whose rows are re-projected
    into the ball after each optimizer step.
    """

    __slots__ = ("name", "curvature", "exp_avg", "exp_avg_sq", "step")

    def __init__(self, data: np.ndarray, name: str = "", curvature: float | None = None) -> None:
        super().__init__(np.array(data, dtype=np.float64), requires_grad=True)
        self.name = name
        self.curvature = curvature
        self.exp_avg = np.zeros_like(self.data)
        self.exp_avg_sq = np.zeros_like(self.data)
        self.step = 0

    def __repr__(self) -> str:
        return f"Parameter({self.name!r}, shape={self.shape})"

    @property
    def hyperbolic(self) -> bool:
        return self.curvature is not None


def as_tensor(value: Tensor | float | np.ndarray) -> Tensor:
    """Wrap constants; tensors pass through."""
    return value if isinstance(value, Tensor) else Tensor(value)


def _result(data: np.ndarray, parents: tuple[Tensor, ...], backward_fn: BackwardFn, op: str) -> Tensor:
    if not np.all(np.isfinite(data)):
        raise NonFiniteError(f"non-finite result in {op}")
    if _GRAD_ENABLED and any(p.requires_grad for p in parents):
        return Tensor(data, requires_grad=True, parents=parents, backward=backward_fn, op=op)
    return Tensor(data, op=op)


def _unbroadcast(grad: np.ndarray, shape: tuple[int, ...]) -> np.ndarray:
    """Sum a broadcast gradient back to the operand shape."""
    while grad.ndim > len(shape):
        grad = grad.sum(axis=0)
    for axis, size in enumerate(shape):
        if size == 1 and grad.shape[axis] != 1:
            grad = grad.sum(axis=axis, keepdims=True)
    return grad


def _broadcast_shape(a: Tensor, b: Tensor, op: str) -> None:
    try:
        np.broadcast_shapes(a.shape, b.shape)
    except ValueError as err:
        raise ShapeError(f"{op}: cannot broadcast {a.shape} with {b.shape}") from err


def add(a: Tensor | float, b: Tensor | float) -> Tensor:
    """Elementwise a + b with broadcasting."""
    a, b = as_tensor(a), as_tensor(b)
    _broadcast_shape(a, b, "add")

    def _backward(g: np.ndarray):
        return _unbroadcast(g, a.shape), _unbroadcast(g, b.shape)

    return _result(a.data + b.data, (a, b), _backward, "add")


def neg(a: Tensor) -> Tensor:
    return _result(-a.data, (a,), lambda g: (-g,), "neg")


def mul(a: Tensor | float, b: Tensor | float) -> Tensor:
    """Elementwise a * b with broadcasting."""
    a, b = as_tensor(a), as_tensor(b)
    _broadcast_shape(a, b, "mul")

    def _backward(g: np.ndarray):
        return _unbroadcast(g * b.data, a.shape), _unbroadcast(g * a.data, b.shape)

    return _result(a.data * b.data, (a, b), _backward, "mul")


def div(a: Tensor | float, b: Tensor | float) -> Tensor:
    """Elementwise a / b with broadcasting."""
    a, b = as_tensor(a), as_tensor(b)
    _broadcast_shape(a, b, "div")

    def _backward(g: np.ndarray):
        return (
            _unbroadcast(g / b.data, a.shape),
            _unbroadcast(-g * a.data / (b.data * b.data), b.shape),
        )

    with np.errstate(divide="ignore", invalid="ignore"):
        out = a.data / b.data
    return _result(out, (a, b), _backward, "div")


def matmul(a: Tensor, b: Tensor) -> Tensor:
    """Matrix product over the last two axes, batched over the leading ones."""
    if a.ndim < 2 or b.ndim < 2 or a.shape[-1] != b.shape[-2]:
        raise ShapeError(f"matmul: incompatible shapes {a.shape} and {b.shape}")

    def _backward(g: np.ndarray):
        ga = g @ np.swapaxes(b.data, -1, -2)
        gb = np.swapaxes(a.data, -1, -2) @ g
        return _unbroadcast(ga, a.shape), _unbroadcast(gb, b.shape)

    try:
        out = np.matmul(a.data, b.data)
    except ValueError as err:
        raise ShapeError(f"matmul: incompatible batch shapes {a.shape} and {b.shape}") from err
    return _result(out, (a, b), _backward, "matmul")


def reshape(a: Tensor, shape: tuple[int, ...]) -> Tensor:
    try:
        out = a.data.reshape(shape)
    except ValueError as err:
        raise ShapeError(f"reshape: cannot view {a.shape} as {shape}") from err
    return _result(out, (a,), lambda g: (g.reshape(a.shape),), "reshape")


def transpose(a: Tensor, axes: tuple[int, ...] | None = None) -> Tensor:
    axes = tuple(reversed(range(a.ndim))) if axes is None else tuple(axes)
    inverse = tuple(np.argsort(axes))
    return _result(np.transpose(a.data, axes), (a,), lambda g: (np.transpose(g, inverse),), "transpose")


def take(a: Tensor, index) -> Tensor:
    """Basic or fancy indexing; repeated indices accumulate in backward."""

    parts = index if isinstance(index, tuple) else (index,)
    fancy = any(isinstance(part, (np.ndarray, list)) for part in parts)

    def _backward(g: np.ndarray):
        full = np.zeros_like(a.data)
        if fancy:
            np.add.at(full, index, g)
        else:
            full[index] += g
        return (full,)

    return _result(a.data[index], (a,), _backward, "take")


def concat(tensors: Sequence[Tensor], axis: int = 0) -> Tensor:
    """Concatenate along an existing axis."""
    tensors = [as_tensor(t) for t in tensors]
    sizes = [t.shape[axis] for t in tensors]
    splits = np.cumsum(sizes)[:-1]

    def _backward(g: np.ndarray):
        return tuple(np.split(g, splits, axis=axis))

    try:
        out = np.concatenate([t.data for t in tensors], axis=axis)
    except ValueError as err:
        raise ShapeError(f"concat: {[t.shape for t in tensors]}") from err
    return _result(out, tuple(tensors), _backward, "concat")


def reduce_sum(a: Tensor, axis=None, keepdims: bool = False) -> Tensor:
    def _backward(g: np.ndarray):
        if axis is not None and not keepdims:
            g = np.expand_dims(g, axis)
        return (np.broadcast_to(g, a.shape).copy(),)

    return _result(np.sum(a.data, axis=axis, keepdims=keepdims), (a,), _backward, "sum")


def reduce_mean(a: Tensor, axis=None, keepdims: bool = False) -> Tensor:
    count = a.data.size if axis is None else int(np.prod([a.shape[i] for i in np.atleast_1d(axis)]))
    return reduce_sum(a, axis, keepdims) * (1.0 / count)


def relu(a: Tensor) -> Tensor:
    mask = a.data > 0
    return _result(a.data * mask, (a,), lambda g: (g * mask,), "relu")


def tanh(a: Tensor) -> Tensor:
    out = np.tanh(a.data)
    return _result(out, (a,), lambda g: (g * (1.0 - out * out),), "tanh")


def sigmoid(a: Tensor) -> Tensor:
    out = 0.5 * (1.0 + np.tanh(0.5 * a.data))
    return _result(out, (a,), lambda g: (g * out * (1.0 - out),), "sigmoid")


def sqrt(a: Tensor) -> Tensor:
    out = np.sqrt(a.data)
    return _result(out, (a,), lambda g: (g * 0.5 / out,), "sqrt")


def artanh(a: Tensor) -> Tensor:
    """arctanh for arguments strictly inside (-1, 1)."""
    x = a.data
    return _result(np.arctanh(x), (a,), lambda g: (g / (1.0 - x * x),), "artanh")


def absolute(a: Tensor) -> Tensor:
    sign = np.sign(a.data)
    return _result(np.abs(a.data), (a,), lambda g: (g * sign,), "abs")


def clip(a: Tensor, low: float, high: float) -> Tensor:
    """Clamp into [low, high]; gradient flows only where the input was inside."""
    inside = (a.data >= low) & (a.data <= high)
    return _result(np.clip(a.data, low, high), (a,), lambda g: (g * inside,), "clip")


def softmax(a: Tensor, axis: int = -1, mask: np.ndarray | None = None) -> Tensor:
    """Softmax along an axis; entries where mask is False get exactly zero."""
    x = a.data
    if mask is not None:
        mask = np.broadcast_to(np.asarray(mask, dtype=bool), x.shape)
        shifted = np.where(mask, x, -np.inf)
        peak = np.max(shifted, axis=axis, keepdims=True)
        peak = np.where(np.isfinite(peak), peak, 0.0)
        exp = np.where(mask, np.exp(np.where(mask, x, 0.0) - peak), 0.0)
    else:
        exp = np.exp(x - np.max(x, axis=axis, keepdims=True))
    total = np.sum(exp, axis=axis, keepdims=True)
    out = exp / np.where(total > 0, total, 1.0)

    def _backward(g: np.ndarray):
        return (out * (g - np.sum(g * out, axis=axis, keepdims=True)),)

    return _result(out, (a,), _backward, "softmax")


def layer_norm(x: Tensor, gain: Tensor, bias: Tensor, eps: float = 1e-5) -> Tensor:
    """Normalize the last axis to zero mean and unit variance, then scale and shift."""
    if gain.shape[-1] != x.shape[-1] or bias.shape[-1] != x.shape[-1]:
        raise ShapeError(f"layer_norm: feature size {x.shape[-1]} vs gain {gain.shape}")
    width = x.shape[-1]
    mu = x.data.mean(axis=-1, keepdims=True)
    centered = x.data - mu
    inv_std = 1.0 / np.sqrt((centered * centered).mean(axis=-1, keepdims=True) + eps)
    xhat = centered * inv_std

    def _backward(g: np.ndarray):
        dxhat = g * gain.data
        dx = (
            inv_std
            / width
            * (
                width * dxhat
                - dxhat.sum(axis=-1, keepdims=True)
                - xhat * (dxhat * xhat).sum(axis=-1, keepdims=True)
            )
        )
        return dx, _unbroadcast(g * xhat, gain.shape), _unbroadcast(g, bias.shape)

    return _result(xhat * gain.data + bias.data, (x, gain, bias), _backward, "layer_norm")


def squared_error(pred: Tensor, target: Tensor | np.ndarray) -> Tensor:
    """Mean of (pred - target)²."""
    diff = pred - as_tensor(target)
    return (diff * diff).mean()


def absolute_error(pred: Tensor, target: Tensor | np.ndarray) -> Tensor:
    """Mean of |pred - target|."""
    return absolute(pred - as_tensor(target)).mean()


def _topological(root: Tensor) -> list[Tensor]:
    order: list[Tensor] = []
    visited: set[int] = set()
    stack: list[tuple[Tensor, bool]] = [(root, False)]
    while stack:
        node, expanded = stack.pop()
        if expanded:
            order.append(node)
            continue
        if id(node) in visited:
            continue
        visited.add(id(node))
        stack.append((node, True))
        for parent in node._parents:
            if parent.requires_grad and id(parent) not in visited:
                stack.append((parent, False))
    return order


def backward(loss: Tensor) -> None:
    """Accumulate d(loss)/d(leaf) into ``.grad`` of every leaf requiring gradients."""
    if loss.data.size != 1:
        raise ShapeError(f"backward needs a scalar loss, got shape {loss.shape}")
    if not loss.requires_grad:
        raise TrainingFault("loss does not depend on any tensor requiring gradients")

    grads: dict[int, np.ndarray] = {id(loss): np.ones_like(loss.data)}
    for node in reversed(_topological(loss)):
        g = grads.pop(id(node), None)
        if g is None:
            continue
        if node._backward is None:
            node.grad = g.copy() if node.grad is None else node.grad + g
            continue
        for parent, pg in zip(node._parents, node._backward(g)):
            if pg is None or not parent.requires_grad:
                continue
            key = id(parent)
            grads[key] = pg if key not in grads else grads[key] + pg


def clip_grad_norm(params: Iterable[Parameter], max_norm: float) -> float:
    """Scale gradients so their global L2 norm is at most max_norm; return the norm before."""
    params = [p for p in params if p.grad is not None]
    total = float(np.sqrt(sum(float(np.sum(p.grad * p.grad)) for p in params)))
    if not np.isfinite(total):
        raise NonFiniteError("non-finite gradient norm")
    if max_norm > 0 and total > max_norm:
        scale = max_norm / (total + 1e-12)
        for p in params:
            p.grad = p.grad * scale
    return total


def adam_step(
    params: Iterable[Parameter],
    learning_rate: float,
    beta1: float = 0.9,
    beta2: float = 0.999,
    epsilon: float = 1e-8,
) -> None:
    """One bias-corrected adaptive-moment update; ball parameters are re-projected."""
    for p in params:
        if p.grad is None:
            continue
        p.step += 1
        p.exp_avg = beta1 * p.exp_avg + (1 - beta1) * p.grad
        p.exp_avg_sq = beta2 * p.exp_avg_sq + (1 - beta2) * p.grad * p.grad
        m_hat = p.exp_avg / (1 - beta1**p.step)
        v_hat = p.exp_avg_sq / (1 - beta2**p.step)
        p.data = p.data - learning_rate * m_hat / (np.sqrt(v_hat) + epsilon)
        if p.hyperbolic:
            p.data = project_array(p.data, p.curvature)


class Adam:
    """Adam over a fixed parameter list with optional global-norm clipping"""

    def __init__(
        self,
        params: Sequence[Parameter],
        learning_rate: float = 1e-4,
        beta1: float = 0.9,
        beta2: float = 0.999,
        epsilon: float = 1e-8,
        grad_clip: float | None = 1.0,
    ) -> None:
        self.params = list(params)
        self.learning_rate = learning_rate
        self.beta1 = beta1
        self.beta2 = beta2
        self.epsilon = epsilon
        self.grad_clip = grad_clip

    def zero_grad(self) -> None:
        for p in self.params:
            p.zero_grad()

    def step(self) -> float:
        """Clip, update and return the pre-clip gradient norm."""
        norm = clip_grad_norm(self.params, self.grad_clip or 0.0)
        adam_step(self.params, self.learning_rate, self.beta1, self.beta2, self.epsilon)
        return norm


def numerical_gradient(fn: Callable[[], float], param: Tensor, h: float = 1e-5) -> np.ndarray:
    """Central finite differences of a scalar function with respect to param."""
    param.data = np.ascontiguousarray(param.data)
    grad = np.zeros_like(param.data)
    flat = param.data.reshape(-1)
    out = grad.reshape(-1)
    for i in range(flat.size):
        original = flat[i]
        flat[i] = original + h
        plus = fn()
        flat[i] = original - h
        minus = fn()
        flat[i] = original
        out[i] = (plus - minus) / (2 * h)
    return grad


def gradient_check(
    loss_fn: Callable[[], Tensor], params: Sequence[Tensor], h: float = 1e-5, atol: float = 1e-7
) -> float:
    """Largest gap between analytic and finite-difference gradients.

    The gap is relative to the larger gradient, or absolute when both are below ``atol``.
    """
    for p in params:
        p.zero_grad()
    backward(loss_fn())
    analytic = [np.zeros_like(p.data) if p.grad is None else p.grad.copy() for p in params]

    def value() -> float:
        with no_grad():
            return loss_fn().item()

    worst = 0.0
    for p, a in zip(params, analytic):
        n = numerical_gradient(value, p, h)
        scale = max(float(np.max(np.abs(a))), float(np.max(np.abs(n))))
        gap = float(np.max(np.abs(a - n)))
        worst = max(worst, gap if scale < atol else gap / scale)
    return worst
