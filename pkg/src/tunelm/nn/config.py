"""Model hyperparameters and the parameter-count formula."""

from __future__ import annotations

from dataclasses import dataclass


@dataclass(frozen=True)
class ModelConfig:
    vocab_size: int | None
    layers: int = 3
    hidden_size: int = 512
    dropout_rate: float = 0.5
    mode: str = "token"  # token | char

    def __post_init__(self):
        if self.vocab_size is not None and self.vocab_size < 2:
            raise ValueError("vocab_size must be at least 2")
        if self.layers < 1:
            raise ValueError("layers must be at least 1")
        if self.hidden_size < 1:
            raise ValueError("hidden_size must be at least 1")
        if not 0.0 <= self.dropout_rate < 1.0:
            raise ValueError("dropout_rate must be in [0, 1)")
        if self.mode not in ("token", "char"):
            raise ValueError(f"unknown mode {self.mode!r}")


def param_count(config: ModelConfig) -> int:
    """Scalar parameters of the full model.

    Layer 1 sees one-hot input of width V, deeper layers width H; each layer
    carries 4 gates of input weights, recurrent weights, and biases; the
    output projection maps H back to V.
    """
    if config.vocab_size is None:
        raise ValueError("vocab_size not resolved yet")
    v, l, h = config.vocab_size, config.layers, config.hidden_size
    first = 4 * (h * (v + h) + h)
    deeper = (l - 1) * 4 * (h * (h + h) + h)
    projection = v * h + v
    return first + deeper + projection
