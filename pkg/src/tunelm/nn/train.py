"""Training loop: 95/5 split, per-epoch RMSprop passes, checkpoints, loss log."""

from __future__ import annotations

import time
from dataclasses import dataclass, replace
from pathlib import Path
from typing import Callable

import numpy as np

from ..corpus import CharCorpus, TokenCorpus
from ..errors import NumericError
from ..tokens import Vocabulary, build_vocabulary
from .batching import (
    CHAR_BATCH,
    CHAR_SEQ_LEN,
    TOKEN_BATCH,
    Minibatch,
    make_char_batches,
    make_token_batches,
)
from .checkpoint import (
    Checkpoint,
    decode_rng_state,
    encode_rng_state,
    save_checkpoint,
)
from .config import ModelConfig
from .lstm import ModelParams, backward, forward, init_params, loss, zero_state
from .optim import (
    CHAR_SCHEDULE,
    TOKEN_SCHEDULE,
    LrSchedule,
    OptimizerState,
    clip_gradients,
    rmsprop_step,
)

VALIDATION_FRACTION = 0.05


@dataclass
class EpochStats:
    epoch: int
    lr: float
    train_loss: float
    val_loss: float
    seconds: float

    def format_line(self) -> str:
        return (
            f"epoch {self.epoch:4d}  lr {self.lr:.6f}  "
            f"train {self.train_loss:.4f}  val {self.val_loss:.4f}  "
            f"{self.seconds:.1f}s"
        )


@dataclass
class TrainResult:
    params: ModelParams
    vocab: Vocabulary
    config: ModelConfig
    schedule: LrSchedule
    history: list[EpochStats]
    checkpoint_paths: list[Path]


def split_token_corpus(
    corpus: TokenCorpus, rng_seed: int, fraction: float = VALIDATION_FRACTION
) -> tuple[list, list]:
    """Deterministic seeded shuffle, then a 95/5 split (train set never empty)."""
    rng = np.random.Generator(np.random.Philox(key=[rng_seed, 1]))
    order = rng.permutation(len(corpus.transcriptions))
    n_val = int(round(len(order) * fraction))
    n_val = min(n_val, len(order) - 1)
    val_ids = set(int(i) for i in order[:n_val])
    train = [corpus.transcriptions[i] for i in range(len(order)) if i not in val_ids]
    val = [corpus.transcriptions[i] for i in sorted(val_ids)]
    return train, val


def split_char_corpus(corpus: CharCorpus, fraction: float = VALIDATION_FRACTION) -> tuple[str, str]:
    """Contiguous tail split; shuffling characters would destroy the text."""
    cut = int(len(corpus.text) * (1.0 - fraction))
    return corpus.text[:cut], corpus.text[cut:]


def _val_loss_token(params: ModelParams, batches: list[Minibatch]) -> float:
    total_nll = 0.0
    total_count = 0.0
    for batch in batches:
        logits, _ = forward(params, batch.inputs)
        count = float(batch.mask.sum())
        total_nll += loss(logits, batch.targets, batch.mask) * count
        total_count += count
    return total_nll / total_count if total_count else float("nan")


def _val_loss_char(params: ModelParams, indices: np.ndarray, seq_len: int) -> float:
    if len(indices) < 2:
        return float("nan")
    state = None
    total_nll = 0.0
    total_count = 0
    for lo in range(0, len(indices) - 1, seq_len):
        hi = min(lo + seq_len, len(indices) - 1)
        inputs = indices[lo:hi][None, :]
        targets = indices[lo + 1 : hi + 1][None, :]
        logits, state = forward(params, inputs, state)
        mask = np.ones_like(targets, np.float32)
        total_nll += loss(logits, targets, mask) * (hi - lo)
        total_count += hi - lo
    return total_nll / total_count


def train(
    corpus: TokenCorpus | CharCorpus,
    model_config: ModelConfig,
    schedule: LrSchedule | None = None,
    epochs: int = 100,
    rng_seed: int = 0,
    batch_size: int | None = None,
    seq_len: int = CHAR_SEQ_LEN,
    checkpoint_dir: str | Path | None = None,
    log: Callable[[str], None] | None = None,
    resume_from: Checkpoint | None = None,
    dtype=np.float32,
) -> TrainResult:
    """Train a model on a corpus; writes one checkpoint per epoch when asked.

    Char corpora train statefully on contiguous streams; token corpora train
    on bucketed complete transcriptions with per-batch state reset. The
    default schedules follow the published recipes for each mode.
    """
    mode = model_config.mode
    if isinstance(corpus, CharCorpus) != (mode == "char"):
        raise ValueError("corpus type does not match model_config.mode")
    if schedule is None:
        schedule = CHAR_SCHEDULE if mode == "char" else TOKEN_SCHEDULE
    if batch_size is None:
        batch_size = CHAR_BATCH if mode == "char" else TOKEN_BATCH

    if mode == "char":
        vocab = build_vocabulary(corpus)
        train_text, val_text = split_char_corpus(corpus)
        train_ids = np.array(vocab.encode_all(train_text), np.int32)
        val_ids = np.array(vocab.encode_all(val_text), np.int32)
        train_sequences = None
        val_batches = None
    else:
        vocab = build_vocabulary(corpus).with_null()
        train_seqs, val_seqs = split_token_corpus(corpus, rng_seed)
        train_sequences = [
            np.array(vocab.encode_all(t.text for t in seq), np.int32) for seq in train_seqs
        ]
        val_sequences = [
            np.array(vocab.encode_all(t.text for t in seq), np.int32) for seq in val_seqs
        ]
        val_batches = (
            make_token_batches(val_sequences, vocab.null_index, batch_size)
            if val_sequences
            else []
        )

    if model_config.vocab_size is None:
        model_config = replace(model_config, vocab_size=vocab.size)
    elif model_config.vocab_size != vocab.size:
        raise ValueError(
            f"config says vocab_size={model_config.vocab_size} but corpus has {vocab.size}"
        )

    if resume_from is not None:
        params = resume_from.params
        opt_state = resume_from.opt_state
        rng = np.random.Generator(np.random.Philox(key=[rng_seed, 2]))
        if resume_from.rng_state is not None:
            rng.bit_generator.state = decode_rng_state(resume_from.rng_state)
        start_epoch = resume_from.epoch + 1
    else:
        params = init_params(model_config, rng_seed, dtype=dtype)
        opt_state = OptimizerState.for_params(params, lr=schedule.lr_at(1))
        rng = np.random.Generator(np.random.Philox(key=[rng_seed, 2]))
        start_epoch = 1

    history: list[EpochStats] = []
    checkpoint_paths: list[Path] = []
    for epoch in range(start_epoch, epochs + 1):
        started = time.perf_counter()
        lr = schedule.lr_at(epoch)
        opt_state.lr = lr
        opt_state.epoch = epoch

        if mode == "char":
            batches = make_char_batches(train_ids, batch_size, seq_len)
        else:
            batches = make_token_batches(
                train_sequences, vocab.null_index, batch_size, rng=rng
            )

        total_nll = 0.0
        total_count = 0.0
        state = None
        for batch in batches:
            if not batch.carry_state:
                state = None
            batch_loss, grads, state = backward(
                params, batch, state, dropout_on=True, rng=rng
            )
            if not np.isfinite(batch_loss):
                raise NumericError(f"training loss diverged at epoch {epoch}")
            grads = clip_gradients(grads)
            params = rmsprop_step(params, grads, opt_state)
            count = float(batch.mask.sum())
            total_nll += batch_loss * count
            total_count += count
        train_loss = total_nll / total_count

        if mode == "char":
            val_loss = _val_loss_char(params, val_ids, seq_len)
        else:
            val_loss = _val_loss_token(params, val_batches) if val_batches else float("nan")

        stats = EpochStats(
            epoch=epoch,
            lr=lr,
            train_loss=train_loss,
            val_loss=val_loss,
            seconds=time.perf_counter() - started,
        )
        history.append(stats)
        if log is not None:
            log(stats.format_line())
        if checkpoint_dir is not None:
            path = Path(checkpoint_dir) / f"epoch_{epoch:04d}.npz"
            save_checkpoint(
                path,
                params,
                vocab,
                opt_state,
                schedule,
                epoch,
                rng_state=encode_rng_state(rng.bit_generator.state),
            )
            checkpoint_paths.append(path)

    return TrainResult(
        params=params,
        vocab=vocab,
        config=model_config,
        schedule=schedule,
        history=history,
        checkpoint_paths=checkpoint_paths,
    )
