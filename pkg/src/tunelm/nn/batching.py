"""Minibatch construction: contiguous char windows and bucketed transcriptions."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..errors import BatchingError

CHAR_BATCH = 50
CHAR_SEQ_LEN = 50
TOKEN_BATCH = 64
BUCKET_WIDTH = 32


@dataclass
class Minibatch:
    inputs: np.ndarray  # (batch, time) int32
    targets: np.ndarray  # (batch, time) int32, inputs shifted by one step
    mask: np.ndarray  # (batch, time) float32, 1 = real, 0 = null padding
    carry_state: bool = False  # continue hidden state from the previous batch


def make_char_batches(
    indices: np.ndarray, batch_size: int = CHAR_BATCH, seq_len: int = CHAR_SEQ_LEN
) -> list[Minibatch]:
    """Cut encoded text into `batch_size` contiguous streams of seq_len windows.

    Consecutive minibatches continue the hidden state. Targets are the next
    character within each stream (the final window wraps to the stream start).
    """
    idx = np.asarray(indices, dtype=np.int32)
    stream_len = len(idx) // batch_size
    if stream_len < seq_len:
        raise BatchingError(
            f"text too short: {len(idx)} chars cannot fill {batch_size} streams of {seq_len}"
        )
    streams = idx[: batch_size * stream_len].reshape(batch_size, stream_len)
    shifted = np.roll(streams, -1, axis=1)  # next char within the stream
    batches = []
    for w in range(stream_len // seq_len):
        lo, hi = w * seq_len, (w + 1) * seq_len
        batches.append(
            Minibatch(
                inputs=streams[:, lo:hi].copy(),
                targets=shifted[:, lo:hi].copy(),
                mask=np.ones((batch_size, seq_len), np.float32),
                carry_state=w > 0,
            )
        )
    return batches


def make_token_batches(
    sequences: list[np.ndarray],
    null_index: int,
    batch_size: int = TOKEN_BATCH,
    rng: np.random.Generator | None = None,
    bucket_width: int = BUCKET_WIDTH,
) -> list[Minibatch]:
    """Bucket transcriptions by length, shuffle within buckets, pad per batch.

    Every transcription appears exactly once; hidden state resets per batch
    (each row is one complete transcription).
    """
    if not sequences:
        raise BatchingError("no transcriptions to batch")
    order = list(range(len(sequences)))
    buckets: dict[int, list[int]] = {}
    for i in order:
        buckets.setdefault(len(sequences[i]) // bucket_width, []).append(i)
    arranged: list[int] = []
    for key in sorted(buckets):
        members = buckets[key]
        if rng is not None:
            perm = rng.permutation(len(members))
            members = [members[int(p)] for p in perm]
        arranged.extend(members)
    batches = []
    for start in range(0, len(arranged), batch_size):
        chunk = [sequences[i] for i in arranged[start : start + batch_size]]
        t = max(len(s) for s in chunk) - 1
        b = len(chunk)
        inputs = np.full((b, t), null_index, np.int32)
        targets = np.full((b, t), null_index, np.int32)
        mask = np.zeros((b, t), np.float32)
        for row, s in enumerate(chunk):
            k = len(s) - 1
            inputs[row, :k] = s[:-1]
            targets[row, :k] = s[1:]
            mask[row, :k] = 1.0
        batches.append(Minibatch(inputs=inputs, targets=targets, mask=mask))
    return batches
