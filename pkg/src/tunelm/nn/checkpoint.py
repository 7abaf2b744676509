"""Self-describing checkpoint files: one .npz holding everything needed to
resume training or to sample (config, vocabulary, parameters, optimizer
accumulators, epoch counter, RNG state). Writes are atomic."""

from __future__ import annotations

import json
import os
import tempfile
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from ..errors import CheckpointError
from ..tokens import Vocabulary
from .config import ModelConfig
from .lstm import LayerParams, ModelParams
from .optim import LrSchedule, OptimizerState


@dataclass
class Checkpoint:
    config: ModelConfig
    vocab: Vocabulary
    params: ModelParams
    opt_state: OptimizerState
    schedule: LrSchedule
    epoch: int
    rng_state: dict | None


def encode_rng_state(state) -> dict:
    """bit_generator.state with ndarrays flattened to JSON-safe lists."""

    def conv(x):
        if isinstance(x, np.ndarray):
            return {"__array__": x.tolist(), "dtype": x.dtype.name}
        if isinstance(x, dict):
            return {k: conv(v) for k, v in x.items()}
        if isinstance(x, np.integer):
            return int(x)
        return x

    return conv(state)


def decode_rng_state(state) -> dict:
    def conv(x):
        if isinstance(x, dict) and "__array__" in x:
            return np.array(x["__array__"], dtype=x["dtype"])
        if isinstance(x, dict):
            return {k: conv(v) for k, v in x.items()}
        return x

    return conv(state)


def save_checkpoint(
    path: str | Path,
    params: ModelParams,
    vocab: Vocabulary,
    opt_state: OptimizerState,
    schedule: LrSchedule,
    epoch: int,
    rng_state: dict | None = None,
) -> Path:
    path = Path(path)
    cfg = params.config
    meta = {
        "format": 1,
        "config": {
            "vocab_size": cfg.vocab_size,
            "layers": cfg.layers,
            "hidden_size": cfg.hidden_size,
            "dropout_rate": cfg.dropout_rate,
            "mode": cfg.mode,
        },
        "vocab": list(vocab.entries),
        "null_index": vocab.null_index,
        "optimizer": {"rho": opt_state.rho, "eps": opt_state.eps, "lr": opt_state.lr},
        "schedule": {
            "base_lr": schedule.base_lr,
            "decay": schedule.decay,
            "decay_after_epoch": schedule.decay_after_epoch,
        },
        "epoch": epoch,
        "rng_state": rng_state,
        "dtype": params.dtype.name,
    }
    arrays: dict[str, np.ndarray] = {"__meta__": np.frombuffer(json.dumps(meta).encode(), dtype=np.uint8)}
    for name, a in params.named_arrays():
        arrays[f"param/{name}"] = np.ascontiguousarray(a, dtype=a.dtype.newbyteorder("<"))
    for name, a in opt_state.sq.items():
        arrays[f"opt/{name}"] = np.ascontiguousarray(a, dtype=a.dtype.newbyteorder("<"))
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp_name = tempfile.mkstemp(dir=path.parent, suffix=".tmp")
    try:
        with os.fdopen(fd, "wb") as fh:
            np.savez(fh, **arrays)
        os.replace(tmp_name, path)
    except BaseException:
        if os.path.exists(tmp_name):
            os.unlink(tmp_name)
        raise
    return path


def load_checkpoint(path: str | Path) -> Checkpoint:
    path = Path(path)
    if not path.exists():
        raise CheckpointError(f"no checkpoint at {path}")
    try:
        with np.load(path) as data:
            meta = json.loads(bytes(data["__meta__"]).decode())
            config = ModelConfig(**meta["config"])
            vocab = Vocabulary(entries=tuple(meta["vocab"]), null_index=meta["null_index"])
            layers = []
            for l in range(config.layers):
                layers.append(
                    LayerParams(
                        w=data[f"param/layer{l}.w"],
                        u=data[f"param/layer{l}.u"],
                        b=data[f"param/layer{l}.b"],
                    )
                )
            params = ModelParams(
                config=config,
                layers=layers,
                proj_w=data["param/proj.w"],
                proj_b=data["param/proj.b"],
            )
            opt = OptimizerState(
                sq={name: data[f"opt/{name}"] for name, _ in params.named_arrays()},
                rho=meta["optimizer"]["rho"],
                eps=meta["optimizer"]["eps"],
                lr=meta["optimizer"]["lr"],
                epoch=meta["epoch"],
            )
            schedule = LrSchedule(**meta["schedule"])
            return Checkpoint(
                config=config,
                vocab=vocab,
                params=params,
                opt_state=opt,
                schedule=schedule,
                epoch=meta["epoch"],
                rng_state=meta["rng_state"],
            )
    except (KeyError, ValueError, json.JSONDecodeError) as exc:
        raise CheckpointError(f"corrupt checkpoint {path}: {exc}") from exc
