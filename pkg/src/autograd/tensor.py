"""
Dense tensor with reverse-mode automatic differentiation.

A Tensor wraps a numpy array. Operations in `src.autograd.functional` build
new tensors that remember their parents and a closure computing the local
gradients; every such node is stamped with its position on the per-thread
Tape. `backward` replays the stamped nodes in exact reverse recording order.
"""

import logging
import threading
from contextlib import contextmanager
from typing import Callable, Iterator, List, Optional, Sequence, Tuple, Union

import numpy as np

from src.exceptions import DimensionError

logger = logging.getLogger(__name__)

DEFAULT_DTYPE = np.float64

BackwardFn = Callable[[np.ndarray], Sequence[Optional[np.ndarray]]]
ArrayLike = Union[np.ndarray, float, int, Sequence]


class Tape:
    """
    Ordered record of executed primitives for one thread.

    The tape does not hold node references itself (nodes hold their parents);
    it hands out strictly increasing positions and tracks whether recording is
    enabled. A Tape is single-writer by construction since it is thread-local.
    """

    def __init__(self):
        self.position = 0
        self.enabled = True

    def record(self) -> int:
        """Reserve the next position on the tape."""
        self.position += 1
        return self.position

    @staticmethod
    def nodes_from(root: "Tensor") -> List["Tensor"]:
        """
        Collect the recorded nodes reachable from `root`.

        Returns:
            Interior nodes ordered from last recorded to first recorded
        """
        seen = set()
        nodes = []
        stack = [root]
        while stack:
            node = stack.pop()
            if id(node) in seen:
                continue
            seen.add(id(node))
            if node._backward is not None:
                nodes.append(node)
                stack.extend(p for p in node._parents if p.requires_grad)
        nodes.sort(key=lambda n: n._position, reverse=True)
        return nodes


_local = threading.local()


def current_tape() -> Tape:
    """Return this thread's tape, creating it on first use."""
    tape = getattr(_local, "tape", None)
    if tape is None:
        tape = Tape()
        _local.tape = tape
    return tape


@contextmanager
def no_grad() -> Iterator[None]:
    """Disable recording for the enclosed block (evaluation and scoring)."""
    tape = current_tape()
    previous = tape.enabled
    tape.enabled = False
    try:
        yield
    finally:
        tape.enabled = previous


def is_grad_enabled() -> bool:
    return current_tape().enabled


class Tensor:
    """
    Dense n-dimensional value taking part in gradient recording.

    Only the `grad` slot is mutated after construction (optimizer updates write
    `data` of leaf parameters in place between steps, never during a pass).
    """

    def __init__(
        self,
        data: ArrayLike,
        requires_grad: bool = False,
        dtype: Optional[np.dtype] = None,
        name: Optional[str] = None,
    ):
        """
        Args:
            data: Array content; copied to a float array
            requires_grad: Whether gradients are accumulated for this leaf
            dtype: Float dtype (float64 default, float32 allowed)
            name: Optional registry name, used in error messages
        """
        if dtype is None:
            dtype = data.dtype if isinstance(data, np.ndarray) and data.dtype.kind == "f" else DEFAULT_DTYPE
        self.data = np.array(data, dtype=dtype)
        self.requires_grad = bool(requires_grad)
        self.grad: Optional[np.ndarray] = None
        self.name = name
        self._parents: Tuple["Tensor", ...] = ()
        self._backward: Optional[BackwardFn] = None
        self._position = 0

    @classmethod
    def from_op(cls, data: np.ndarray, parents: Sequence["Tensor"], backward_fn: BackwardFn) -> "Tensor":
        """
        Wrap the result of a primitive, recording it when any parent needs grads.

        Args:
            data: Forward result
            parents: Input tensors in the order `backward_fn` returns gradients
            backward_fn: Maps dL/d(out) to a tuple of dL/d(parent) (None to skip)
        """
        out = cls.__new__(cls)
        out.data = data
        out.grad = None
        out.name = None
        tape = current_tape()
        needs_grad = tape.enabled and any(p.requires_grad for p in parents)
        out.requires_grad = needs_grad
        if needs_grad:
            out._parents = tuple(parents)
            out._backward = backward_fn
            out._position = tape.record()
        else:
            out._parents = ()
            out._backward = None
            out._position = 0
        return out

    @property
    def shape(self) -> Tuple[int, ...]:
        return self.data.shape

    @property
    def ndim(self) -> int:
        return self.data.ndim

    @property
    def size(self) -> int:
        return self.data.size

    @property
    def dtype(self) -> np.dtype:
        return self.data.dtype

    @property
    def is_leaf(self) -> bool:
        return self._backward is None

    def item(self) -> float:
        return float(self.data.reshape(-1)[0]) if self.data.size == 1 else float("nan")

    def numpy(self) -> np.ndarray:
        return self.data

    def detach(self) -> "Tensor":
        return Tensor(self.data.copy(), requires_grad=False)

    def zero_grad(self) -> None:
        self.grad = None

    def accumulate_grad(self, grad: np.ndarray) -> None:
        """Add `grad` into the grad slot (accumulation is additive)."""
        if grad.shape != self.data.shape:
            raise DimensionError(
                f"gradient shape {grad.shape} does not match tensor shape {self.data.shape}"
                + (f" for {self.name}" if self.name else "")
            )
        if self.grad is None:
            self.grad = np.array(grad, dtype=self.data.dtype)
        else:
            self.grad = self.grad + grad

    def backward(self) -> None:
        backward(self)

    def __repr__(self) -> str:
        label = f"name={self.name!r}, " if self.name else ""
        return f"Tensor({label}shape={self.shape}, requires_grad={self.requires_grad})"

    # operator sugar; the primitives live in functional.py
    def __add__(self, other):
        return F.add(self, other)

    def __radd__(self, other):
        return F.add(other, self)

    def __sub__(self, other):
        return F.sub(self, other)

    def __rsub__(self, other):
        return F.sub(other, self)

    def __mul__(self, other):
        return F.mul(self, other)

    def __rmul__(self, other):
        return F.mul(other, self)

    def __truediv__(self, other):
        if isinstance(other, Tensor):
            raise TypeError("division by a Tensor is not supported; multiply by a constant instead")
        return F.mul(self, 1.0 / other)

    def __neg__(self):
        return F.mul(self, -1.0)

    def __matmul__(self, other):
        return F.matmul(self, other)

    def __getitem__(self, index):
        return F.getitem(self, index)

    def sum(self, axis=None, keepdims: bool = False) -> "Tensor":
        return F.sum(self, axis=axis, keepdims=keepdims)

    def mean(self, axis=None, keepdims: bool = False) -> "Tensor":
        return F.mean(self, axis=axis, keepdims=keepdims)

    def reshape(self, *shape) -> "Tensor":
        if len(shape) == 1 and isinstance(shape[0], (tuple, list)):
            shape = tuple(shape[0])
        return F.reshape(self, shape)

    def transpose(self, *axes) -> "Tensor":
        return F.transpose(self, axes or None)

    @property
    def T(self) -> "Tensor":
        return F.transpose(self, None)


def backward(loss: Tensor) -> None:
    """
    Populate grads of every requires_grad leaf reachable from a scalar loss.

    Args:
        loss: Scalar tensor; its seed gradient is 1

    Raises:
        DimensionError: If `loss` is not a scalar
        ValueError: If nothing upstream of `loss` requires gradients
    """
    if loss.data.size != 1:
        raise DimensionError(f"backward needs a scalar loss, got shape {loss.shape}")
    if not loss.requires_grad:
        raise ValueError("loss does not depend on any tensor that requires grad (empty tape)")

    seed = np.ones_like(loss.data)
    if loss.is_leaf:
        loss.accumulate_grad(seed)
        return

    pending = {id(loss): seed}
    for node in Tape.nodes_from(loss):
        grad_out = pending.pop(id(node), None)
        if grad_out is None:
            continue
        parent_grads = node._backward(grad_out)
        for parent, grad in zip(node._parents, parent_grads):
            if grad is None or not parent.requires_grad:
                continue
            if parent.is_leaf:
                parent.accumulate_grad(grad)
            elif id(parent) in pending:
                pending[id(parent)] = pending[id(parent)] + grad
            else:
                pending[id(parent)] = grad


from src.autograd import functional as F  # noqa: E402
