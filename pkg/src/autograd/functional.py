"""
Differentiable primitives.

Each function computes its forward result with numpy and hands
`Tensor.from_op` a closure returning the gradient for every input. Broadcasting
is supported only where the model needs it (bias adds, shared weight matrices
against batched activations, attention masks).
"""

import logging
import math
from typing import Optional, Sequence, Tuple, Union

import numpy as np

from src.autograd.tensor import Tensor
from src.exceptions import ConfigError, DimensionError

logger = logging.getLogger(__name__)

Operand = Union[Tensor, np.ndarray, float, int]

MASK_FILL = -1e9
GELU_COEF = math.sqrt(2.0 / math.pi)


def _as_tensor(value: Operand, like: Optional[Tensor] = None) -> Tensor:
    if isinstance(value, Tensor):
        return value
    dtype = like.dtype if like is not None else None
    return Tensor(np.asarray(value), requires_grad=False, dtype=dtype)


def unbroadcast(grad: np.ndarray, shape: Tuple[int, ...]) -> np.ndarray:
    """Sum `grad` over broadcast dimensions so that it matches `shape`."""
    if grad.shape == shape:
        return grad
    while grad.ndim > len(shape):
        grad = grad.sum(axis=0)
    for axis, size in enumerate(shape):
        if size == 1 and grad.shape[axis] != 1:
            grad = grad.sum(axis=axis, keepdims=True)
    return grad


def add(a: Operand, b: Operand) -> Tensor:
    a = _as_tensor(a, b if isinstance(b, Tensor) else None)
    b = _as_tensor(b, a)
    try:
        data = a.data + b.data
    except ValueError as e:
        raise DimensionError(f"cannot add shapes {a.shape} and {b.shape}") from e
    return Tensor.from_op(
        data, (a, b),
        lambda g: (unbroadcast(g, a.shape), unbroadcast(g, b.shape)),
    )


def sub(a: Operand, b: Operand) -> Tensor:
    a = _as_tensor(a, b if isinstance(b, Tensor) else None)
    b = _as_tensor(b, a)
    try:
        data = a.data - b.data
    except ValueError as e:
        raise DimensionError(f"cannot subtract shapes {a.shape} and {b.shape}") from e
    return Tensor.from_op(
        data, (a, b),
        lambda g: (unbroadcast(g, a.shape), unbroadcast(-g, b.shape)),
    )


def mul(a: Operand, b: Operand) -> Tensor:
    """Elementwise (Hadamard) product with broadcasting."""
    a = _as_tensor(a, b if isinstance(b, Tensor) else None)
    b = _as_tensor(b, a)
    try:
        data = a.data * b.data
    except ValueError as e:
        raise DimensionError(f"cannot multiply shapes {a.shape} and {b.shape}") from e
    return Tensor.from_op(
        data, (a, b),
        lambda g: (
            unbroadcast(g * b.data, a.shape) if a.requires_grad else None,
            unbroadcast(g * a.data, b.shape) if b.requires_grad else None,
        ),
    )


def matmul(a: Tensor, b: Tensor) -> Tensor:
    """
    Matrix product over the last two axes; leading axes broadcast.

    Raises:
        DimensionError: If the inner dimensions disagree
    """
    if a.ndim < 2 or b.ndim < 2 or a.shape[-1] != b.shape[-2]:
        raise DimensionError(f"matmul shape mismatch: {a.shape} x {b.shape}")
    data = np.matmul(a.data, b.data)

    def _backward(g):
        grad_a = unbroadcast(np.matmul(g, np.swapaxes(b.data, -1, -2)), a.shape) if a.requires_grad else None
        grad_b = unbroadcast(np.matmul(np.swapaxes(a.data, -1, -2), g), b.shape) if b.requires_grad else None
        return grad_a, grad_b

    return Tensor.from_op(data, (a, b), _backward)


def transpose(x: Tensor, axes: Optional[Sequence[int]] = None) -> Tensor:
    """Permute axes; with no axes, swap the last two."""
    if axes is None:
        axes = list(range(x.ndim))
        axes[-1], axes[-2] = axes[-2], axes[-1]
    axes = tuple(axes)
    inverse = tuple(np.argsort(axes))
    return Tensor.from_op(np.transpose(x.data, axes), (x,), lambda g: (np.transpose(g, inverse),))


def reshape(x: Tensor, shape: Sequence[int]) -> Tensor:
    original = x.shape
    try:
        data = x.data.reshape(shape)
    except ValueError as e:
        raise DimensionError(f"cannot reshape {original} to {tuple(shape)}") from e
    return Tensor.from_op(data, (x,), lambda g: (g.reshape(original),))


def sum(x: Tensor, axis=None, keepdims: bool = False) -> Tensor:  # noqa: A001
    data = x.data.sum(axis=axis, keepdims=keepdims)

    def _backward(g):
        if axis is not None and not keepdims:
            g = np.expand_dims(g, axis)
        return (np.broadcast_to(g, x.shape).copy(),)

    return Tensor.from_op(np.asarray(data), (x,), _backward)


def mean(x: Tensor, axis=None, keepdims: bool = False) -> Tensor:
    count = x.size if axis is None else np.prod([x.shape[a] for a in np.atleast_1d(axis)])
    return mul(sum(x, axis=axis, keepdims=keepdims), 1.0 / float(count))


def getitem(x: Tensor, index) -> Tensor:
    data = x.data[index]

    def _backward(g):
        grad = np.zeros_like(x.data)
        np.add.at(grad, index, g)
        return (grad,)

    return Tensor.from_op(np.array(data), (x,), _backward)


def stack(tensors: Sequence[Tensor], axis: int = 0) -> Tensor:
    data = np.stack([t.data for t in tensors], axis=axis)

    def _backward(g):
        pieces = np.moveaxis(g, axis, 0)
        return tuple(pieces[i] for i in range(len(tensors)))

    return Tensor.from_op(data, tuple(tensors), _backward)


def concat_lastdim(tensors: Sequence[Tensor]) -> Tensor:
    """
    Concatenate along the last axis.

    Raises:
        DimensionError: If operands disagree on any other dimension
    """
    leading = {t.shape[:-1] for t in tensors}
    if len(leading) != 1:
        raise DimensionError(f"concat operands disagree on leading dims: {[t.shape for t in tensors]}")
    sizes = [t.shape[-1] for t in tensors]
    bounds = np.cumsum(sizes)[:-1]
    data = np.concatenate([t.data for t in tensors], axis=-1)
    return Tensor.from_op(data, tuple(tensors), lambda g: tuple(np.split(g, bounds, axis=-1)))


def sigmoid(x: Tensor) -> Tensor:
    # split by sign so exp never overflows
    z = x.data
    out = np.empty_like(z)
    pos = z >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-z[pos]))
    ez = np.exp(z[~pos])
    out[~pos] = ez / (1.0 + ez)
    return Tensor.from_op(out, (x,), lambda g: (g * out * (1.0 - out),))


def tanh(x: Tensor) -> Tensor:
    out = np.tanh(x.data)
    return Tensor.from_op(out, (x,), lambda g: (g * (1.0 - out * out),))


def gelu(x: Tensor) -> Tensor:
    """
    GELU, tanh approximation: 0.5x(1 + tanh(sqrt(2/pi)(x + 0.044715x^3))).

    Differs from the exact erf form by less than 1e-3.
    """
    z = x.data
    inner = GELU_COEF * (z + 0.044715 * z ** 3)
    t = np.tanh(inner)
    out = 0.5 * z * (1.0 + t)

    def _backward(g):
        d_inner = GELU_COEF * (1.0 + 3 * 0.044715 * z ** 2)
        return (g * (0.5 * (1.0 + t) + 0.5 * z * (1.0 - t * t) * d_inner),)

    return Tensor.from_op(out, (x,), _backward)


def softmax_lastdim(x: Tensor, mask: Optional[np.ndarray] = None) -> Tensor:
    """
    Softmax over the last axis with optional key masking.

    Args:
        x: Scores
        mask: 0/1 array broadcastable to `x`; 0 entries receive exactly zero weight

    Returns:
        Weights that sum to 1 over unmasked entries. A row with every entry
        masked comes back as zeros and is reported through the logger.
    """
    if x.shape[-1] < 1:
        raise DimensionError("softmax needs a non-empty last dimension")
    z = x.data
    keep = None
    if mask is not None:
        keep = np.broadcast_to(np.asarray(mask) != 0, z.shape)
        z = np.where(keep, z, MASK_FILL)
    shifted = z - z.max(axis=-1, keepdims=True)
    e = np.exp(shifted)
    out = e / e.sum(axis=-1, keepdims=True)
    if keep is not None:
        out = np.where(keep, out, 0.0)
        dead = ~keep.any(axis=-1)
        if dead.any():
            logger.warning(f"softmax: {int(dead.sum())} fully masked row(s) returned as zeros")

    def _backward(g):
        dot = (g * out).sum(axis=-1, keepdims=True)
        return (out * (g - dot),)

    return Tensor.from_op(out, (x,), _backward)


def layer_norm(x: Tensor, gain: Tensor, bias: Tensor, eps: float = 1e-5) -> Tensor:
    """
    Normalize over the last (feature) axis, then scale and shift.

    Raises:
        DimensionError: If the feature axis is empty or gain/bias do not match it
    """
    n = x.shape[-1]
    if n == 0:
        raise DimensionError("layer_norm over a zero-length feature dimension")
    if gain.shape != (n,) or bias.shape != (n,):
        raise DimensionError(f"layer_norm gain/bias shapes {gain.shape}/{bias.shape} do not match features {n}")
    mu = x.data.mean(axis=-1, keepdims=True)
    centered = x.data - mu
    var = (centered * centered).mean(axis=-1, keepdims=True)
    inv_std = 1.0 / np.sqrt(var + eps)
    xhat = centered * inv_std
    out = xhat * gain.data + bias.data

    def _backward(g):
        dxhat = g * gain.data
        grad_x = inv_std / n * (
            n * dxhat
            - dxhat.sum(axis=-1, keepdims=True)
            - xhat * (dxhat * xhat).sum(axis=-1, keepdims=True)
        )
        lead = tuple(range(g.ndim - 1))
        return grad_x, (g * xhat).sum(axis=lead), g.sum(axis=lead)

    return Tensor.from_op(out, (x, gain, bias), _backward)


def dropout(x: Tensor, p: float, training: bool, rng: Optional[np.random.Generator]) -> Tensor:
    """
    Inverted dropout.

    In training mode each entry is zeroed with probability p and survivors are
    scaled by 1/(1-p); in eval mode (or p == 0) the input is returned as is.

    Raises:
        ConfigError: If p is outside [0, 1)
    """
    if not 0.0 <= p < 1.0:
        raise ConfigError(f"dropout probability must be in [0, 1), got {p}")
    if not training or p == 0.0:
        return x
    if rng is None:
        raise ConfigError("training-mode dropout needs a random generator")
    keep = (rng.random(x.shape) >= p).astype(x.dtype) / (1.0 - p)
    return Tensor.from_op(x.data * keep, (x,), lambda g: (g * keep,))


def embedding_lookup(table: Tensor, ids: np.ndarray) -> Tensor:
    """
    Gather rows of `table`; gradients scatter back additively.

    Raises:
        IndexError: If an id falls outside [0, V)
    """
    ids = np.asarray(ids, dtype=np.int64)
    vocab_size = table.shape[0]
    if ids.size and (ids.min() < 0 or ids.max() >= vocab_size):
        bad = int(ids[(ids < 0) | (ids >= vocab_size)].reshape(-1)[0])
        raise IndexError(f"token id {bad} out of range for embedding table with V={vocab_size}")
    data = table.data[ids]

    def _backward(g):
        grad = np.zeros_like(table.data)
        np.add.at(grad, ids, g)
        return (grad,)

    return Tensor.from_op(data, (table,), _backward)


def binary_cross_entropy_with_logits(logits: Tensor, targets: np.ndarray) -> Tensor:
    """
    Sum over labels, mean over the batch: -(1/B) sum_b sum_k [y log p + (1-y) log(1-p)].

    Computed as max(z,0) - z*y + log(1 + exp(-|z|)).
    """
    z = logits.data
    y = np.asarray(targets, dtype=z.dtype)
    if y.shape != z.shape:
        raise DimensionError(f"targets shape {y.shape} does not match logits {z.shape}")
    batch = z.shape[0] if z.ndim > 1 else 1
    per_cell = np.maximum(z, 0.0) - z * y + np.log1p(np.exp(-np.abs(z)))
    value = np.asarray(per_cell.sum() / batch, dtype=z.dtype)

    def _backward(g):
        p = np.where(z >= 0, 1.0 / (1.0 + np.exp(-np.abs(z))), np.exp(-np.abs(z)) / (1.0 + np.exp(-np.abs(z))))
        return (g * (p - y) / batch,)

    return Tensor.from_op(value, (logits,), _backward)
