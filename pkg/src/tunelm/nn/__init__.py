"""Stacked-LSTM language model engine (trained from scratch, numpy arrays)."""

from .batching import Minibatch, make_char_batches, make_token_batches
from .checkpoint import Checkpoint, load_checkpoint, save_checkpoint
from .config import ModelConfig, param_count
from .kernels import BACKEND
from .lstm import ModelParams, backward, forward, init_params, loss, zero_state
from .optim import (
    CHAR_SCHEDULE,
    TOKEN_SCHEDULE,
    LrSchedule,
    OptimizerState,
    clip_gradients,
    rmsprop_step,
)
from .train import TrainResult, train

__all__ = [
    "BACKEND",
    "CHAR_SCHEDULE",
    "Checkpoint",
    "LrSchedule",
    "Minibatch",
    "ModelConfig",
    "ModelParams",
    "OptimizerState",
    "TOKEN_SCHEDULE",
    "TrainResult",
    "backward",
    "clip_gradients",
    "forward",
    "init_params",
    "load_checkpoint",
    "loss",
    "make_char_batches",
    "make_token_batches",
    "param_count",
    "rmsprop_step",
    "save_checkpoint",
    "train",
    "zero_state",
]
