"""Temperature sampling, priming, generation, corpus generation."""

from __future__ import annotations

import numpy as np
import pytest

from tunelm.errors import GenerationError
from tunelm.nn import ModelConfig, init_params
from tunelm.sampling import (
    GenerationConfig,
    LoadedModel,
    generate,
    generate_corpus,
    prime,
    sample_next,
    stream_rng,
)
from tunelm.tokens import (
    END_TOKEN,
    START_TOKEN,
    Vocabulary,
    validate_grammar,
)


class TestSampleNext:
    def test_uniform_logits_uniform_frequencies(self):
        v = 5
        rng = stream_rng(123)
        n = 100_000
        counts = np.zeros(v)
        logits = np.zeros(v)
        for _ in range(n):
            counts[sample_next(logits, 1.0, rng)] += 1
        freqs = counts / n
        sigma = np.sqrt(0.2 * 0.8 / n)
        assert np.all(np.abs(freqs - 1 / v) < 3 * sigma)

    def test_low_temperature_sharpens_to_argmax(self):
        logits = np.array([0.0, 10.0, 1.0, -2.0])
        rng = stream_rng(5)
        draws = [sample_next(logits, 0.01, rng) for _ in range(2000)]
        assert np.mean(np.array(draws) == 1) > 0.999

    def test_temperature_preserves_argmax(self):
        rng = np.random.default_rng(0)
        for _ in range(50):
            logits = rng.normal(size=12)
            for t in (0.05, 0.5, 1.0, 3.0, 50.0):
                scaled = logits / t
                assert np.argmax(scaled) == np.argmax(logits)

    def test_forbidden_index_never_drawn(self):
        logits = np.array([5.0, 5.0, 5.0])
        rng = stream_rng(9)
        draws = {sample_next(logits, 1.0, rng, forbid_index=1) for _ in range(500)}
        assert 1 not in draws

    def test_fixed_seed_reproduces_draws(self):
        logits = np.linspace(-1, 1, 8)
        a = [sample_next(logits, 1.0, stream_rng(42, 3)) for _ in range(1)]
        draws_a = [sample_next(logits, 0.8, stream_rng(42)) for _ in range(10)]
        draws_b = [sample_next(logits, 0.8, stream_rng(42)) for _ in range(10)]
        # one generator, consumed progressively
        rng1, rng2 = stream_rng(42), stream_rng(42)
        seq1 = [sample_next(logits, 0.8, rng1) for _ in range(50)]
        seq2 = [sample_next(logits, 0.8, rng2) for _ in range(50)]
        assert seq1 == seq2


def _rigged_model(end_logit=50.0):
    """Zero weights except an output bias that forces the end token."""
    vocab = Vocabulary.from_entries(
        [START_TOKEN, END_TOKEN, "M:4/4", "K:Cmaj", "C", "|"], with_null=True
    )
    cfg = ModelConfig(vocab_size=vocab.size, layers=1, hidden_size=4, dropout_rate=0.0)
    params = init_params(cfg, rng_seed=0)
    for _, a in params.named_arrays():
        a[...] = 0.0
    params.proj_b[vocab.encode(END_TOKEN)] = end_logit
    return LoadedModel(params=params, vocab=vocab, config=cfg)


class TestPrime:
    def test_empty_seed_defaults_to_start_token(self, toy_token_model):
        model = toy_token_model.model
        state, last = prime(model)
        assert last == model.vocab.encode(START_TOKEN)
        for h, c in state:
            assert not h.any() and not c.any()

    def test_out_of_vocabulary_element_named(self, toy_token_model):
        with pytest.raises(GenerationError) as err:
            prime(toy_token_model.model, "<s> M:9/16")
        assert "M:9/16" in str(err.value)

    def test_seed_advances_state(self, toy_token_model):
        model = toy_token_model.model
        state, last = prime(model, "<s> M:4/4 K:Cmaj")
        assert last == model.vocab.encode("K:Cmaj")
        assert any(h.any() for h, _ in state)

    def test_random_state_init(self, toy_token_model):
        model = toy_token_model.model
        state, _ = prime(model, rng=stream_rng(3), random_state_init=True)
        for h, c in state:
            assert np.abs(h).max() <= 1 and h.any()

    def test_low_temperature_equals_greedy_oracle(self, toy_token_model):
        model = toy_token_model.model
        from tunelm.nn import forward

        config = GenerationConfig(temperature=1e-4, max_steps=30, rng_seed=1)
        result = generate(model, config)
        state, last = prime(model)
        greedy = []
        for _ in range(30):
            logits, state = forward(model.params, np.array([[last]], np.int32), state)
            row = logits[0, 0].copy()
            if model.vocab.null_index is not None:
                row[model.vocab.null_index] = -np.inf
            last = int(np.argmax(row))
            greedy.append(model.vocab.decode(last))
            if greedy[-1] == END_TOKEN:
                break
        assert result.elements == greedy


class TestGenerate:
    def test_single_step_budget(self, toy_token_model):
        result = generate(toy_token_model.model, GenerationConfig(max_steps=1, rng_seed=0))
        assert len(result.elements) == 1

    def test_rigged_end_token_stops_immediately(self):
        model = _rigged_model()
        result = generate(model, GenerationConfig(max_steps=50, rng_seed=0))
        assert result.stop_reason == "end_token"
        assert result.elements == [END_TOKEN]

    def test_output_excludes_seed(self):
        model = _rigged_model()
        result = generate(model, GenerationConfig(seed="<s> M:4/4 K:Cmaj", max_steps=5, rng_seed=0))
        assert result.elements == [END_TOKEN]

    def test_char_mode_counts_characters(self, toy_char_model):
        result = generate(
            toy_char_model.model, GenerationConfig(seed="T: ", max_steps=120, rng_seed=4)
        )
        assert result.stop_reason == "max_steps"
        assert len(result.elements) == 120
        assert result.mode == "char"

    def test_char_delimiter_stop(self, toy_char_model):
        model = toy_char_model.model
        config = GenerationConfig(
            seed="K: Cmaj\n", max_steps=4000, rng_seed=11, stop_at_delimiter=True
        )
        result = generate(model, config)
        if result.stop_reason == "delimiter":
            assert result.text.endswith("\n\n")
        else:
            assert len(result.elements) == 4000

    def test_invalid_config_rejected(self):
        with pytest.raises(GenerationError):
            GenerationConfig(temperature=0.0)
        with pytest.raises(GenerationError):
            GenerationConfig(max_steps=0)


class TestGenerateCorpus:
    def test_zero_count(self, toy_token_model):
        corpus, records = generate_corpus(toy_token_model.model, 0)
        assert len(corpus.transcriptions) == 0 and records == []

    def test_deterministic_bytes(self, toy_token_model):
        model = toy_token_model.model
        config = GenerationConfig(max_steps=200, rng_seed=99)
        a, _ = generate_corpus(model, 12, config)
        b, _ = generate_corpus(model, 12, config)
        assert a.to_text() == b.to_text()

    def test_different_streams_differ(self, toy_token_model):
        corpus, _ = generate_corpus(
            toy_token_model.model, 8, GenerationConfig(max_steps=200, rng_seed=3)
        )
        texts = {corpus.transcriptions[i] and " ".join(t.text for t in corpus.transcriptions[i]) for i in range(8)}
        assert len(texts) > 1

    def test_flagged_fraction_matches_recount(self, toy_token_model):
        corpus, records = generate_corpus(
            toy_token_model.model, 20, GenerationConfig(max_steps=250, rng_seed=17)
        )
        recount = sum(1 for seq in corpus.transcriptions if not validate_grammar(seq).ok)
        assert sum(1 for r in records if not r.grammar_valid) == recount
        assert corpus.source_counts["grammar_invalid"] == recount

    def test_transcriptions_start_with_seed(self, toy_token_model):
        corpus, _ = generate_corpus(
            toy_token_model.model, 5, GenerationConfig(max_steps=150, rng_seed=2)
        )
        for seq in corpus.transcriptions:
            assert seq[0].text == START_TOKEN

    def test_char_model_rejected(self, toy_char_model):
        with pytest.raises(GenerationError):
            generate_corpus(toy_char_model.model, 1)
