"""Iterated sampling from trained models: seeding, temperature, stopping rules.

Every generation owns a counter-based RNG stream (Philox keyed by
(rng_seed, stream index)), so corpora are reproducible bit-for-bit and
parallelizable without coordination.
"""

from __future__ import annotations

from collections import Counter
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .corpus import TokenCorpus
from .errors import GenerationError
from .nn import ModelConfig, forward, load_checkpoint, zero_state
from .nn.lstm import LstmState, ModelParams
from .tokens import END_TOKEN, START_TOKEN, TokenSeq, Vocabulary, token, validate_grammar


@dataclass(frozen=True)
class GenerationConfig:
    """One generation request: seed, temperature, step budget, RNG seed."""

    seed: str = ""  # token-format text (token mode) or raw characters (char mode)
    temperature: float = 1.0
    max_steps: int = 400
    rng_seed: int = 0
    stop_at_delimiter: bool = False  # char mode: stop at a blank line
    random_state_init: bool = False  # draw the initial state uniform [-1, 1]

    def __post_init__(self):
        if self.temperature <= 0:
            raise GenerationError("temperature must be positive")
        if self.max_steps < 1:
            raise GenerationError("max_steps must be at least 1")


@dataclass
class LoadedModel:
    """Immutable bundle a sampler or service works against."""

    params: ModelParams
    vocab: Vocabulary
    config: ModelConfig

    @property
    def mode(self) -> str:
        return self.config.mode

    @classmethod
    def from_checkpoint(cls, path: str | Path) -> "LoadedModel":
        ck = load_checkpoint(path)
        return cls(params=ck.params, vocab=ck.vocab, config=ck.config)


@dataclass
class GenerationResult:
    elements: list[str]  # generated tokens or characters, excluding the seed
    stop_reason: str  # end_token | max_steps | delimiter
    mode: str = "token"

    @property
    def text(self) -> str:
        return (" " if self.mode == "token" else "").join(self.elements)


def stream_rng(rng_seed: int, stream: int = 0) -> np.random.Generator:
    return np.random.Generator(np.random.Philox(key=[rng_seed, stream]))


def sample_next(
    logits: np.ndarray,
    temperature: float,
    rng: np.random.Generator,
    forbid_index: int | None = None,
) -> int:
    """Draw an index from softmax(logits / temperature)."""
    scaled = np.asarray(logits, dtype=np.float64) / temperature
    scaled -= scaled.max()
    probs = np.exp(scaled)
    if forbid_index is not None:
        probs[forbid_index] = 0.0
    probs /= probs.sum()
    return int(np.searchsorted(np.cumsum(probs), rng.random(), side="right"))


def _seed_elements(model: LoadedModel, seed: str) -> list[str]:
    if model.mode == "token":
        elements = seed.split() if seed.strip() else [START_TOKEN]
    else:
        elements = list(seed) if seed else ["\n"]
    for e in elements:
        if e not in model.vocab:
            raise GenerationError(f"seed element {e!r} is not in the vocabulary")
    return elements


def prime(
    model: LoadedModel,
    seed: str = "",
    rng: np.random.Generator | None = None,
    random_state_init: bool = False,
) -> tuple[LstmState, int]:
    """Feed the seed; returns the state plus the index of its final element.

    An empty seed means a zero state whose first input is the
    transcription-start token (token mode) or a newline (char mode).
    """
    elements = _seed_elements(model, seed)
    indices = model.vocab.encode_all(elements)
    if random_state_init:
        if rng is None:
            raise GenerationError("random state initialization needs an rng")
        h = model.config.hidden_size
        state = [
            (
                rng.uniform(-1, 1, size=(1, h)).astype(model.params.dtype),
                rng.uniform(-1, 1, size=(1, h)).astype(model.params.dtype),
            )
            for _ in range(model.config.layers)
        ]
    else:
        state = zero_state(model.params, 1)
    if len(indices) > 1:
        _, state = forward(model.params, np.array([indices[:-1]], dtype=np.int32), state)
    return state, indices[-1]


def _run(model: LoadedModel, config: GenerationConfig, rng: np.random.Generator) -> GenerationResult:
    state, last = prime(
        model, config.seed, rng=rng, random_state_init=config.random_state_init
    )
    vocab = model.vocab
    end_index = vocab.try_encode(END_TOKEN) if model.mode == "token" else None
    newline_index = vocab.try_encode("\n") if model.mode == "char" else None
    out: list[int] = []
    stop_reason = "max_steps"
    for _ in range(config.max_steps):
        logits, state = forward(model.params, np.array([[last]], dtype=np.int32), state)
        last = sample_next(
            logits[0, 0], config.temperature, rng, forbid_index=vocab.null_index
        )
        out.append(last)
        if end_index is not None and last == end_index:
            stop_reason = "end_token"
            break
        if (
            config.stop_at_delimiter
            and newline_index is not None
            and len(out) >= 2
            and out[-1] == newline_index
            and out[-2] == newline_index
        ):
            stop_reason = "delimiter"
            break
    return GenerationResult(
        elements=[vocab.decode(i) for i in out],
        stop_reason=stop_reason,
        mode=model.mode,
    )


def generate(model: LoadedModel, config: GenerationConfig, stream: int = 0) -> GenerationResult:
    """Sample until the end token (token mode), the step budget, or a blank line.

    The returned elements exclude the seed. Reproducible: a fixed
    (rng_seed, stream) pair gives an identical result.
    """
    return _run(model, config, stream_rng(config.rng_seed, stream))


@dataclass
class GenerationRecord:
    stop_reason: str
    length: int
    grammar_valid: bool


def generate_corpus(
    model: LoadedModel,
    count: int,
    config: GenerationConfig = GenerationConfig(),
) -> tuple[TokenCorpus, list[GenerationRecord]]:
    """Independent generations on distinct RNG streams; grammar-invalid
    outputs are retained and flagged so error statistics can run over them."""
    if model.mode != "token":
        raise GenerationError("corpus generation needs a token-mode model")
    transcriptions: list[TokenSeq] = []
    records: list[GenerationRecord] = []
    counts: Counter = Counter()
    seed_elements = _seed_elements(model, config.seed)
    for i in range(count):
        result = _run(model, config, stream_rng(config.rng_seed, stream=i))
        seq = [token(t) for t in seed_elements + result.elements]
        valid = validate_grammar(seq).ok
        transcriptions.append(seq)
        records.append(
            GenerationRecord(
                stop_reason=result.stop_reason, length=len(seq), grammar_valid=valid
            )
        )
        counts["grammar_valid" if valid else "grammar_invalid"] += 1
    return TokenCorpus(transcriptions=transcriptions, source_counts=counts), records


def records_report(records: list[GenerationRecord]) -> str:
    """Sidecar metadata: one line per generation."""
    lines = ["index\tstop_reason\tlength\tgrammar_valid"]
    for i, r in enumerate(records):
        lines.append(f"{i}\t{r.stop_reason}\t{r.length}\t{int(r.grammar_valid)}")
    return "\n".join(lines) + "\n"
