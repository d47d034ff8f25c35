"""
Minimal reverse-mode automatic differentiation on numpy arrays.

Supplies every primitive the encoder, recurrent stack and classifier head use.
"""

from src.autograd.tensor import Tape, Tensor, backward, current_tape, is_grad_enabled, no_grad
from src.autograd import functional

__all__ = ["Tape", "Tensor", "backward", "current_tape", "is_grad_enabled", "no_grad", "functional"]
