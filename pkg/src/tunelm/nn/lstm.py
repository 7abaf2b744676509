"""Stacked LSTM with one-hot inputs: parameters, forward, loss, full BPTT.

Index arrays are (batch, time); internally everything runs time-major.
Dropout (inverted scaling) is applied to each layer's hidden output when
enabled, so inference needs no rescaling.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Iterator

import numpy as np

from ..errors import NumericError
from .batching import Minibatch
from .config import ModelConfig
from .kernels import lstm_backward_cells, lstm_forward_cells

INIT_SCALE = 0.08
FORGET_BIAS = 1.0


@dataclass
class LayerParams:
    w: np.ndarray  # (4H, D) input weights, D = V for layer 0 else H
    u: np.ndarray  # (4H, H) recurrent weights
    b: np.ndarray  # (4H,) biases, gate order: input, forget, output, candidate


@dataclass
class ModelParams:
    config: ModelConfig
    layers: list[LayerParams]
    proj_w: np.ndarray  # (V, H)
    proj_b: np.ndarray  # (V,)

    @property
    def dtype(self):
        return self.proj_w.dtype

    def named_arrays(self) -> Iterator[tuple[str, np.ndarray]]:
        for i, layer in enumerate(self.layers):
            yield f"layer{i}.w", layer.w
            yield f"layer{i}.u", layer.u
            yield f"layer{i}.b", layer.b
        yield "proj.w", self.proj_w
        yield "proj.b", self.proj_b

    def astype(self, dtype) -> "ModelParams":
        return ModelParams(
            config=self.config,
            layers=[
                LayerParams(l.w.astype(dtype), l.u.astype(dtype), l.b.astype(dtype))
                for l in self.layers
            ],
            proj_w=self.proj_w.astype(dtype),
            proj_b=self.proj_b.astype(dtype),
        )


LstmState = list[tuple[np.ndarray, np.ndarray]]  # per layer (h, c), each (B, H)


def zero_state(params: ModelParams, batch_size: int) -> LstmState:
    h = params.config.hidden_size
    dt = params.dtype
    return [
        (np.zeros((batch_size, h), dt), np.zeros((batch_size, h), dt))
        for _ in range(params.config.layers)
    ]


def init_params(
    config: ModelConfig, rng_seed: int, dtype=np.float32
) -> ModelParams:
    """Uniform [-0.08, 0.08] weights, forget-gate biases 1, other biases 0."""
    if config.vocab_size is None:
        raise ValueError("vocab_size not resolved")
    rng = np.random.Generator(np.random.Philox(rng_seed))
    v, h = config.vocab_size, config.hidden_size

    def uniform(*shape):
        return rng.uniform(-INIT_SCALE, INIT_SCALE, size=shape).astype(dtype)

    layers = []
    for l in range(config.layers):
        d = v if l == 0 else h
        b = np.zeros(4 * h, dtype)
        b[h : 2 * h] = FORGET_BIAS
        layers.append(LayerParams(w=uniform(4 * h, d), u=uniform(4 * h, h), b=b))
    return ModelParams(
        config=config,
        layers=layers,
        proj_w=uniform(v, h),
        proj_b=np.zeros(v, dtype),
    )


def _forward_internal(
    params: ModelParams,
    inputs: np.ndarray,
    state: LstmState | None,
    dropout_on: bool,
    rng: np.random.Generator | None,
):
    """Time-major forward pass keeping everything backward needs."""
    cfg = params.config
    x_idx = np.ascontiguousarray(np.asarray(inputs, dtype=np.int64))
    b_sz, t_sz = x_idx.shape
    if x_idx.min() < 0 or x_idx.max() >= cfg.vocab_size:
        raise NumericError("input index outside the vocabulary")
    if state is None:
        state = zero_state(params, b_sz)
    if dropout_on and cfg.dropout_rate > 0 and rng is None:
        raise ValueError("dropout requires an rng")

    dt = params.dtype
    keep = 1.0 - cfg.dropout_rate
    new_state: LstmState = []
    layer_caches = []
    below: np.ndarray | None = None  # (T, B, H) input activations of the current layer
    for l, layer in enumerate(params.layers):
        if l == 0:
            xz = np.ascontiguousarray(layer.w.T[x_idx].transpose(1, 0, 2))  # (T, B, 4H)
        else:
            xz = below.reshape(t_sz * b_sz, -1) @ layer.w.T
            xz = np.ascontiguousarray(xz.reshape(t_sz, b_sz, -1))
        h0, c0 = state[l]
        h0 = np.ascontiguousarray(h0.astype(dt, copy=False))
        c0 = np.ascontiguousarray(c0.astype(dt, copy=False))
        u_t = np.ascontiguousarray(layer.u.T)
        hs, cs, tc, i_g, f_g, o_g, g_g = lstm_forward_cells(xz, u_t, layer.b, h0, c0)
        if dropout_on and cfg.dropout_rate > 0:
            mask = (rng.random(hs.shape) < keep).astype(dt) / keep
            dropped = hs * mask
        else:
            mask = None
            dropped = hs
        layer_caches.append(
            {
                "inp_idx": x_idx if l == 0 else None,
                "inp_act": None if l == 0 else below,
                "hs": hs,
                "cs": cs,
                "tc": tc,
                "i": i_g,
                "f": f_g,
                "o": o_g,
                "g": g_g,
                "h0": h0,
                "c0": c0,
                "mask": mask,
            }
        )
        new_state.append((hs[-1].copy(), cs[-1].copy()))
        below = dropped
    flat = below.reshape(t_sz * b_sz, -1)
    logits = (flat @ params.proj_w.T + params.proj_b).reshape(t_sz, b_sz, -1)
    if not np.isfinite(logits).all():
        raise NumericError("non-finite activations in forward pass")
    return logits, new_state, layer_caches, below


def forward(
    params: ModelParams,
    inputs: np.ndarray,
    state: LstmState | None = None,
    dropout_on: bool = False,
    rng: np.random.Generator | None = None,
) -> tuple[np.ndarray, LstmState]:
    """Logits over the vocabulary at every position: (batch, time, V)."""
    logits, new_state, _, _ = _forward_internal(params, inputs, state, dropout_on, rng)
    return np.ascontiguousarray(logits.transpose(1, 0, 2)), new_state


def _log_softmax(logits: np.ndarray) -> np.ndarray:
    shifted = logits - logits.max(axis=-1, keepdims=True)
    return shifted - np.log(np.exp(shifted).sum(axis=-1, keepdims=True))


def loss(logits: np.ndarray, targets: np.ndarray, mask: np.ndarray) -> float:
    """Mean negative log-likelihood over mask=1 positions; (batch, time) layout."""
    total = float(mask.sum())
    if total == 0:
        raise ValueError("mask selects no positions")
    logp = _log_softmax(np.asarray(logits, dtype=np.float64))
    b_idx, t_idx = np.indices(targets.shape)
    picked = logp[b_idx, t_idx, targets]
    return float(-(picked * mask).sum() / total)


def backward(
    params: ModelParams,
    batch: Minibatch,
    state: LstmState | None = None,
    dropout_on: bool = False,
    rng: np.random.Generator | None = None,
) -> tuple[float, dict[str, np.ndarray], LstmState]:
    """Full BPTT over the batch; returns (loss, gradients by name, new state)."""
    cfg = params.config
    dt = params.dtype
    logits_tbv, new_state, caches, top = _forward_internal(
        params, batch.inputs, state, dropout_on, rng
    )
    t_sz, b_sz, v = logits_tbv.shape
    targets = np.asarray(batch.targets, dtype=np.int64).T  # (T, B)
    mask = np.asarray(batch.mask, dtype=dt).T  # (T, B)
    total = float(mask.sum())
    if total == 0:
        raise ValueError("mask selects no positions")

    shifted = logits_tbv - logits_tbv.max(axis=-1, keepdims=True)
    exp = np.exp(shifted)
    probs = exp / exp.sum(axis=-1, keepdims=True)
    t_idx, b_idx = np.indices(targets.shape)
    picked = shifted[t_idx, b_idx, targets] - np.log(exp.sum(axis=-1))
    loss_value = float(-(picked * mask).sum() / total)

    dlogits = probs
    dlogits[t_idx, b_idx, targets] -= 1.0
    dlogits *= (mask / total)[..., None]

    grads: dict[str, np.ndarray] = {}
    flat_top = top.reshape(t_sz * b_sz, -1)
    flat_dlogits = dlogits.reshape(t_sz * b_sz, v).astype(dt, copy=False)
    grads["proj.w"] = flat_dlogits.T @ flat_top
    grads["proj.b"] = flat_dlogits.sum(axis=0)
    d_below = (flat_dlogits @ params.proj_w).reshape(t_sz, b_sz, -1)

    for l in range(cfg.layers - 1, -1, -1):
        cache = caches[l]
        layer = params.layers[l]
        dh = d_below
        if cache["mask"] is not None:
            dh = dh * cache["mask"]
        dh = np.ascontiguousarray(dh)
        dz, _, _ = lstm_backward_cells(
            dh,
            np.ascontiguousarray(layer.u),
            cache["i"], cache["f"], cache["o"], cache["g"],
            cache["cs"], cache["tc"], cache["c0"],
        )
        h_prev = np.concatenate([cache["h0"][None], cache["hs"][:-1]], axis=0)
        flat_dz = dz.reshape(t_sz * b_sz, -1)
        grads[f"layer{l}.u"] = flat_dz.T @ h_prev.reshape(t_sz * b_sz, -1)
        grads[f"layer{l}.b"] = flat_dz.sum(axis=0)
        if l == 0:
            dwt = np.zeros((cfg.vocab_size, 4 * cfg.hidden_size), dt)
            np.add.at(dwt, cache["inp_idx"].T.reshape(-1), flat_dz)
            grads["layer0.w"] = dwt.T.copy()
        else:
            flat_inp = cache["inp_act"].reshape(t_sz * b_sz, -1)
            grads[f"layer{l}.w"] = flat_dz.T @ flat_inp
            d_below = (flat_dz @ layer.w).reshape(t_sz, b_sz, -1)
    for name, g in grads.items():
        if not np.isfinite(g).all():
            raise NumericError("non-finite gradient", parameter=name)
    return loss_value, grads, new_state
