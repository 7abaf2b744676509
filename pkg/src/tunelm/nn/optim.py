"""RMSprop with elementwise gradient clipping, plus the learning-rate schedules."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .lstm import ModelParams

CLIP_LO = -5.0
CLIP_HI = 5.0
RMSPROP_RHO = 0.95
RMSPROP_EPS = 1e-8


@dataclass
class LrSchedule:
    """Base rate with multiplicative decay after a threshold epoch (1-indexed)."""

    base_lr: float
    decay: float = 1.0
    decay_after_epoch: int = 0

    def lr_at(self, epoch: int) -> float:
        if epoch <= self.decay_after_epoch or self.decay == 1.0:
            return self.base_lr
        return self.base_lr * self.decay ** (epoch - self.decay_after_epoch)


CHAR_SCHEDULE = LrSchedule(base_lr=0.002, decay=0.95, decay_after_epoch=10)
TOKEN_SCHEDULE = LrSchedule(base_lr=0.003, decay=0.97, decay_after_epoch=20)


def clip_gradients(
    grads: dict[str, np.ndarray], lo: float = CLIP_LO, hi: float = CLIP_HI
) -> dict[str, np.ndarray]:
    """Elementwise clamp to [lo, hi]."""
    return {name: np.clip(g, lo, hi) for name, g in grads.items()}


@dataclass
class OptimizerState:
    """Per-parameter running mean-square accumulators."""

    sq: dict[str, np.ndarray]
    rho: float = RMSPROP_RHO
    eps: float = RMSPROP_EPS
    lr: float = 0.0
    epoch: int = 0

    @classmethod
    def for_params(cls, params: ModelParams, lr: float) -> "OptimizerState":
        return cls(sq={name: np.zeros_like(a) for name, a in params.named_arrays()}, lr=lr)


def rmsprop_step(
    params: ModelParams, grads: dict[str, np.ndarray], state: OptimizerState
) -> ModelParams:
    """a <- rho*a + (1-rho)*g^2; p <- p - lr * g / (sqrt(a) + eps). In place."""
    for name, array in params.named_arrays():
        g = grads[name]
        acc = state.sq[name]
        acc *= state.rho
        acc += (1.0 - state.rho) * g * g
        array -= state.lr * g / (np.sqrt(acc) + state.eps)
    return params
