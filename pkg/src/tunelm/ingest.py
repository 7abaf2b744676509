"""Data-dump ingestion: record parsing, filtering, and corpus construction.

Dump records are comma-separated with double-quoted fields; a quoted field may
contain embedded commas, newlines, and doubled quotes. Malformed records are
skipped and tallied, never fatal. Filters follow the training-data recipe:
drop transcriptions under 7 played measures, drop multi-key/multi-meter
bodies, strip title fields and ornaments, transpose everything to root C.
"""

from __future__ import annotations

import csv
import io
import re
from collections import Counter
from dataclasses import dataclass, replace
from typing import Iterable, TextIO

from . import score
from .corpus import CharCorpus, TokenCorpus
from .errors import IngestError, TokenizeError, TuneLmError, UnparseableKeyError
from .keys import parse_key
from .tokens import TokenKind, strip_ornaments, tokenize_body, transpose

_FIELD_COUNT = 9

# An ABC information field at line start or inline ([K:G]). The colon of a
# barline cluster (e.g. a line beginning "E:|") is not a field.
_FIELD_IN_BODY_RE = re.compile(r"(?:^|[\n\[])\s*([A-Za-z]):(?!\|)")


@dataclass(frozen=True)
class RawEntry:
    """One contributed tune setting from the weekly data dump."""

    tune_id: int
    setting_id: int
    title: str
    tune_type: str
    meter: str
    key_text: str
    abc_body: str
    date: str
    user: str


def parse_dump(stream: TextIO | str) -> tuple[list[RawEntry], Counter]:
    """Parse dump records into entries; malformed records are skipped and tallied."""
    if isinstance(stream, str):
        stream = io.StringIO(stream)
    entries: list[RawEntry] = []
    tallies: Counter = Counter()
    try:
        reader = csv.reader(stream)
        for row in reader:
            if not row:
                continue
            if len(row) != _FIELD_COUNT:
                tallies["bad_field_count"] += 1
                continue
            try:
                tune_id = int(row[0])
                setting_id = int(row[1])
            except ValueError:
                tallies["bad_identifier"] += 1
                continue
            if tune_id <= 0 or setting_id <= 0:
                tallies["bad_identifier"] += 1
                continue
            if not row[6].strip():
                tallies["empty_body"] += 1
                continue
            entries.append(
                RawEntry(
                    tune_id=tune_id,
                    setting_id=setting_id,
                    title=row[2],
                    tune_type=row[3],
                    meter=row[4],
                    key_text=row[5],
                    abc_body=row[6],
                    date=row[7],
                    user=row[8],
                )
            )
    except (csv.Error, UnicodeDecodeError) as exc:
        raise IngestError(f"unreadable dump stream: {exc}") from exc
    return entries, tallies


def build_char_corpus(entries: Iterable[RawEntry]) -> tuple[CharCorpus, Counter]:
    """Five fields per entry (title, meter, unit length, key, body), blank-line separated.

    Bodies stay verbatim; only the key field is abbreviated for display
    ("Amixolydian" -> "Amix").
    """
    blocks: list[str] = []
    tallies: Counter = Counter()
    for entry in entries:
        body = entry.abc_body.strip("\n").rstrip()
        if not body.strip():
            tallies["empty_body"] += 1
            continue
        try:
            key = parse_key(entry.key_text).abbrev()
        except UnparseableKeyError:
            tallies["unparseable_key"] += 1
            continue
        blocks.append(f"T: {entry.title}\nM: {entry.meter}\nL: 1/8\nK: {key}\n{body}")
    text = "\n\n".join(blocks)
    if text:
        text += "\n"
    return CharCorpus(text=text, entry_count=len(blocks)), tallies


def _chords_balanced(seq) -> bool:
    depth = 0
    for t in seq:
        if t.kind is not TokenKind.MEASURE:
            continue
        if t.text == "[":
            depth += 1
        elif t.text == "]":
            if depth == 0:
                return False
            depth -= 1
        elif depth:
            return False  # chord left open across a barline
    return depth == 0


def rejection_total(tallies: Counter) -> int:
    """Rejected-entry count (the stripped_* keys tally removed symbols, not entries)."""
    return sum(n for key, n in tallies.items() if not key.startswith("stripped_"))


def filter_for_tokens(entries: Iterable[RawEntry]) -> tuple[list[RawEntry], Counter]:
    """Keep entries usable as complete single-voice transcriptions.

    Retained entries come back with cleaned bodies (title fields live outside
    the body already; ornaments are stripped here and tallied under
    ``stripped_*`` keys). Rejections are tallied per reason, one per entry.
    """
    kept: list[RawEntry] = []
    tallies: Counter = Counter()
    for entry in entries:
        try:
            key = parse_key(entry.key_text)
        except UnparseableKeyError:
            tallies["unparseable_key"] += 1
            continue
        field_letters = [m.group(1).upper() for m in _FIELD_IN_BODY_RE.finditer(entry.abc_body)]
        if "K" in field_letters or "M" in field_letters:
            tallies["extra_key_or_meter"] += 1
            continue
        if "V" in field_letters:
            tallies["multi_voice"] += 1
            continue
        if field_letters:
            tallies["embedded_field"] += 1
            continue
        body, removed = strip_ornaments(entry.abc_body)
        try:
            seq = tokenize_body(body, entry.meter, key)
        except TokenizeError:
            tallies["untokenizable"] += 1
            continue
        if not _chords_balanced(seq):
            tallies["unmatched_chord"] += 1
            continue
        try:
            played = score.validate_measures(seq)
        except TuneLmError:
            tallies["unsupported_structure"] += 1
            continue
        if len(played.measures) < 7:
            tallies["too_few_measures"] += 1
            continue
        for name, count in removed.items():
            tallies[f"stripped_{name}"] += count
        kept.append(replace(entry, abc_body=body))
    return kept, tallies


def build_token_corpus(
    entries: Iterable[RawEntry], explicit_repeats: bool = False
) -> TokenCorpus:
    """Tokenize filtered entries, transpose to root C, optionally play out repeats.

    Deterministic: the same entries and flags give a byte-identical corpus.
    """
    transcriptions = []
    counts: Counter = Counter()
    for entry in entries:
        try:
            key = parse_key(entry.key_text)
        except UnparseableKeyError:
            counts["unparseable_key"] += 1
            continue
        try:
            seq = tokenize_body(entry.abc_body, entry.meter, key)
            seq = transpose(seq, key)
            if explicit_repeats:
                seq = score.expand_repeats(seq)
        except TuneLmError:
            counts["transposition_failed"] += 1
            continue
        transcriptions.append(seq)
        counts["retained"] += 1
    return TokenCorpus(transcriptions=transcriptions, source_counts=counts)
