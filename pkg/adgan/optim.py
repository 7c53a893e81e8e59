"""
adgan.optim
-----------
RMSProp updates and Kaiming-normal initialization.

Parameters are updated in place (``param.values`` is rewritten) so every
network keeps pointing at the same :class:`~adgan.tensor.Tensor` objects.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np

from adgan.errors import ShapeError
from adgan.tensor import Tensor


@dataclass
class RmspropState:
    """Per-parameter squared-gradient accumulator plus the optimizer constants."""

    acc: np.ndarray
    rho: float = 0.99
    eps: float = 1e-8
    lr: float = 1e-4

    @classmethod
    def for_param(cls, param: Tensor, lr: float, rho: float = 0.99, eps: float = 1e-8) -> "RmspropState":
        return cls(np.zeros_like(param.values), rho=rho, eps=eps, lr=lr)


def rmsprop_step(
    param: Tensor,
    grad: Optional[np.ndarray],
    state: RmspropState,
) -> Tensor:
    """
    One RMSProp update::

        acc   ← ρ·acc + (1 − ρ)·g²
        param ← param − lr·g / (√acc + ε)

    A ``None`` gradient counts as zero.  Returns *param* (mutated).
    """
    g = np.zeros_like(param.values) if grad is None else np.asarray(grad)
    if g.shape != param.shape or state.acc.shape != param.shape:
        raise ShapeError(
            f"rmsprop shapes differ: param {param.shape}, grad {g.shape}, acc {state.acc.shape}"
        )
    state.acc *= state.rho
    state.acc += (1.0 - state.rho) * g * g
    param.values -= (state.lr * g / (np.sqrt(state.acc) + state.eps)).astype(param.values.dtype)
    return param


def kaiming_init(
    shape: Sequence[int],
    fan_in: int,
    rng: np.random.Generator,
    dtype=np.float64,
    name: Optional[str] = None,
) -> Tensor:
    """Trainable tensor drawn from ``normal(0, √(2 / fan_in))``."""
    if fan_in < 1:
        raise ValueError(f"fan_in must be ≥ 1, got {fan_in}")
    std = np.sqrt(2.0 / fan_in)
    values = rng.normal(0.0, std, size=tuple(shape)).astype(dtype)
    return Tensor(values, requires_grad=True, name=name)
