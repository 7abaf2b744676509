"""Char windows and bucketed token minibatches."""

from __future__ import annotations

import numpy as np
import pytest

from tunelm.errors import BatchingError
from tunelm.nn import make_char_batches, make_token_batches


class TestCharBatches:
    def test_2500_chars_make_exactly_one_batch(self):
        idx = np.arange(2500) % 41
        batches = make_char_batches(idx, batch_size=50, seq_len=50)
        assert len(batches) == 1
        assert batches[0].inputs.shape == (50, 50)
        # no character reused
        flat = batches[0].inputs.reshape(-1)
        assert len(flat) == 2500

    def test_targets_shift_within_stream(self):
        idx = np.arange(300)
        batches = make_char_batches(idx, batch_size=3, seq_len=50)
        assert len(batches) == 2
        for w, batch in enumerate(batches):
            assert bool(batch.carry_state) == (w > 0)
        first = batches[0]
        assert np.array_equal(first.targets[:, :-1], first.inputs[:, 1:])
        # the next window continues where this one stopped
        assert np.array_equal(first.targets[:, -1], batches[1].inputs[:, 0])

    def test_reconstruction_oracle(self):
        rng = np.random.default_rng(0)
        idx = rng.integers(0, 97, size=5217)
        batch_size, seq_len = 7, 31
        batches = make_char_batches(idx, batch_size=batch_size, seq_len=seq_len)
        stream_len = len(idx) // batch_size
        used = (stream_len // seq_len) * seq_len
        rebuilt = np.concatenate([b.inputs for b in batches], axis=1)
        expected = idx[: batch_size * stream_len].reshape(batch_size, stream_len)[:, :used]
        assert np.array_equal(rebuilt, expected)

    def test_mask_all_ones(self):
        batches = make_char_batches(np.arange(2500), batch_size=50, seq_len=50)
        assert batches[0].mask.all()

    def test_too_short_raises(self):
        with pytest.raises(BatchingError):
            make_char_batches(np.arange(100), batch_size=50, seq_len=50)


def _sequences(rng, count, low=5, high=120):
    return [
        rng.integers(0, 30, size=rng.integers(low, high)).astype(np.int32)
        for _ in range(count)
    ]


class TestTokenBatches:
    def test_equal_lengths_no_padding(self):
        rng = np.random.default_rng(1)
        seqs = [rng.integers(0, 9, size=20).astype(np.int32) for _ in range(64)]
        batches = make_token_batches(seqs, null_index=9, batch_size=64)
        assert len(batches) == 1
        assert batches[0].mask.all()
        assert batches[0].inputs.shape == (64, 19)

    def test_every_transcription_appears_exactly_once(self):
        rng = np.random.default_rng(2)
        seqs = _sequences(rng, 157)
        batches = make_token_batches(seqs, null_index=30, rng=np.random.default_rng(3))
        seen = []
        for b in batches:
            for row in range(b.inputs.shape[0]):
                n = int(b.mask[row].sum())
                full = np.concatenate([b.inputs[row, :n], b.targets[row, n - 1 : n]])
                seen.append(tuple(int(x) for x in full))
        expected = sorted(tuple(int(x) for x in s) for s in seqs)
        assert sorted(seen) == expected

    def test_mask_sum_matches_token_count_oracle(self):
        rng = np.random.default_rng(4)
        seqs = _sequences(rng, 200)
        batches = make_token_batches(seqs, null_index=30, rng=np.random.default_rng(5))
        mask_total = sum(float(b.mask.sum()) for b in batches)
        # one prediction per token except the first of each transcription
        assert mask_total == sum(len(s) - 1 for s in seqs)

    def test_padding_uses_null_index(self):
        seqs = [np.arange(4, dtype=np.int32), np.arange(9, dtype=np.int32)]
        batches = make_token_batches(seqs, null_index=77, batch_size=2)
        b = batches[0]
        assert b.inputs.shape == (2, 8)
        assert (b.inputs[0, 3:] == 77).all()
        assert (b.mask[0, 3:] == 0).all()

    def test_bucketing_groups_similar_lengths(self):
        rng = np.random.default_rng(6)
        short = [rng.integers(0, 9, size=10).astype(np.int32) for _ in range(64)]
        long = [rng.integers(0, 9, size=100).astype(np.int32) for _ in range(64)]
        batches = make_token_batches(short + long, null_index=9, batch_size=64,
                                     rng=np.random.default_rng(7))
        widths = sorted(b.inputs.shape[1] for b in batches)
        assert widths == [9, 99]  # shorts never padded up to the longs

    def test_shuffle_is_seeded(self):
        rng = np.random.default_rng(8)
        seqs = _sequences(rng, 100)
        a = make_token_batches(seqs, 30, rng=np.random.Generator(np.random.Philox(1)))
        b = make_token_batches(seqs, 30, rng=np.random.Generator(np.random.Philox(1)))
        for x, y in zip(a, b):
            assert np.array_equal(x.inputs, y.inputs)

    def test_empty_raises(self):
        with pytest.raises(BatchingError):
            make_token_batches([], null_index=0)
