"""
AdamW with decoupled weight decay, plus global-norm gradient clipping.

    m <- b1 m + (1 - b1) g          v <- b2 v + (1 - b2) g^2
    m^ = m / (1 - b1^t)             v^ = v / (1 - b2^t)
    theta <- theta - lr_t * (m^ / (sqrt(v^) + eps) + wd * theta_prev)
"""

import logging
import math
from dataclasses import dataclass, field
from typing import Dict, List, Optional, Protocol, Sequence, Tuple

import numpy as np

from src.autograd import Tensor
from src.exceptions import ConfigError, DimensionError

logger = logging.getLogger(__name__)


def exempt_from_decay(name: str) -> bool:
    """Biases and LayerNorm parameters are not decayed."""
    leaf = name.rsplit(".", 1)[-1]
    return leaf in ("gain", "bias") or leaf.startswith("b_")


@dataclass
class OptimizerState:
    """Moments, step counter and hyperparameters of one AdamW instance."""

    lr: float = 1e-5
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8
    weight_decay: float = 0.01
    t: int = 0
    m: Dict[str, np.ndarray] = field(default_factory=dict)
    v: Dict[str, np.ndarray] = field(default_factory=dict)

    def __post_init__(self):
        if self.lr < 0:
            raise ConfigError(f"learning rate must be >= 0, got {self.lr}")
        if not (0.0 <= self.beta1 < 1.0 and 0.0 <= self.beta2 < 1.0):
            raise ConfigError(f"betas must be in [0, 1), got ({self.beta1}, {self.beta2})")
        if self.eps <= 0:
            raise ConfigError(f"eps must be positive, got {self.eps}")
        if self.weight_decay < 0:
            raise ConfigError(f"weight_decay must be >= 0, got {self.weight_decay}")


class Optimizer(Protocol):
    """What the Trainer needs from an optimizer."""

    state: OptimizerState

    def step(self, lr: Optional[float] = None) -> None:
        ...

    def zero_grad(self) -> None:
        ...


def adamw_step(
    params: Sequence[Tuple[str, Tensor]],
    grads: Sequence[Optional[np.ndarray]],
    state: OptimizerState,
    lr_t: float,
    decay: Optional[Dict[str, bool]] = None,
) -> None:
    """
    One AdamW update in place.

    Args:
        params: (name, tensor) pairs
        grads: Gradient per parameter (None skips that parameter)
        state: Moments and hyperparameters; `t` is incremented once
        lr_t: Learning rate for this step
        decay: name -> apply weight decay (default: all)

    Raises:
        DimensionError: If a gradient or stored moment disagrees with its parameter's shape
    """
    state.t += 1
    t = state.t
    bc1 = 1.0 - state.beta1 ** t
    bc2 = 1.0 - state.beta2 ** t
    for (name, param), grad in zip(params, grads):
        if grad is None:
            continue
        if grad.shape != param.shape:
            raise DimensionError(f"{name}: gradient shape {grad.shape} != parameter shape {param.shape}")
        m = state.m.get(name)
        v = state.v.get(name)
        if m is None:
            m = np.zeros_like(param.data)
            v = np.zeros_like(param.data)
        elif m.shape != param.shape or v.shape != param.shape:
            raise DimensionError(f"{name}: moment shape {m.shape} != parameter shape {param.shape}")

        m = state.beta1 * m + (1.0 - state.beta1) * grad
        v = state.beta2 * v + (1.0 - state.beta2) * grad * grad
        state.m[name] = m
        state.v[name] = v

        direction = (m / bc1) / (np.sqrt(v / bc2) + state.eps)
        if state.weight_decay and (decay is None or decay.get(name, True)):
            direction = direction + state.weight_decay * param.data
        param.data -= lr_t * direction


def global_norm(grads: Sequence[Optional[np.ndarray]]) -> float:
    total = 0.0
    for g in grads:
        if g is not None:
            total += float(np.sum(g * g))
    return math.sqrt(total)


def clip_global_norm(grads: Sequence[Optional[np.ndarray]], max_norm: float) -> float:
    """
    Scale all gradients in place so their joint L2 norm is at most `max_norm`.

    Returns:
        The factor applied (1.0 when the norm was already within bounds)
    """
    if max_norm <= 0:
        raise ConfigError(f"clip max_norm must be positive, got {max_norm}")
    norm = global_norm(grads)
    if norm <= max_norm or norm == 0.0:
        return 1.0
    scale = max_norm / norm
    for g in grads:
        if g is not None:
            g *= scale
    return scale


class AdamW:
    """AdamW bound to one model's trainable parameters."""

    def __init__(
        self,
        named_params: Sequence[Tuple[str, Tensor]],
        lr: float = 1e-5,
        betas: Sequence[float] = (0.9, 0.999),
        eps: float = 1e-8,
        weight_decay: float = 0.01,
        decay_bias_and_norm: bool = False,
    ):
        self.params: List[Tuple[str, Tensor]] = list(named_params)
        self.state = OptimizerState(
            lr=float(lr), beta1=float(betas[0]), beta2=float(betas[1]),
            eps=float(eps), weight_decay=float(weight_decay),
        )
        self.decay = {
            name: decay_bias_and_norm or not exempt_from_decay(name) for name, _ in self.params
        }

    @classmethod
    def from_section(cls, named_params: Sequence[Tuple[str, Tensor]], section: Dict) -> "AdamW":
        """Build from the `optimizer` config section."""
        return cls(
            named_params,
            lr=section.get("lr", 1e-5),
            betas=section.get("betas", (0.9, 0.999)),
            eps=section.get("eps", 1e-8),
            weight_decay=section.get("weight_decay", 0.01),
            decay_bias_and_norm=bool(section.get("decay_bias_and_norm", False)),
        )

    def grads(self) -> List[Optional[np.ndarray]]:
        return [p.grad for _, p in self.params]

    def step(self, lr: Optional[float] = None) -> None:
        adamw_step(self.params, self.grads(), self.state, self.state.lr if lr is None else lr, self.decay)

    def zero_grad(self) -> None:
        for _, p in self.params:
            p.zero_grad()
