"""Corpus containers and their on-disk text formats.

The char corpus is one continuous UTF-8 string. The token corpus is one
transcription per line, tokens separated by single spaces.
"""

from __future__ import annotations

from collections import Counter
from dataclasses import dataclass, field

from .tokens import TokenSeq, seq_from_text, seq_to_text


@dataclass
class CharCorpus:
    text: str
    entry_count: int


@dataclass
class TokenCorpus:
    transcriptions: list[TokenSeq]
    source_counts: Counter = field(default_factory=Counter)

    def __len__(self) -> int:
        return len(self.transcriptions)

    def to_text(self) -> str:
        return "\n".join(seq_to_text(seq) for seq in self.transcriptions) + (
            "\n" if self.transcriptions else ""
        )

    @classmethod
    def from_text(cls, text: str) -> "TokenCorpus":
        seqs = [seq_from_text(line) for line in text.splitlines() if line.strip()]
        return cls(transcriptions=seqs)
