"""Musical semantics for token sequences.

Repeat signs are resolved with a player-style pass machine: an unpaired ``:|``
takes its opening at the transcription start or the previous section
boundary, and a variant second ending spans one bar unless an explicit
boundary arrives sooner. Everything downstream (timed events, measure
validation, structure detection) is built on those played-out passes.
"""

from __future__ import annotations

import hashlib
import re
from dataclasses import dataclass
from fractions import Fraction

from .errors import SemanticsError, UnsupportedStructureError
from .keys import parse_key
from .tokens import (
    Token,
    TokenKind,
    TokenSeq,
    duration_value,
    meter_fraction,
    pitch_fields,
    sounding_pitch,
    tuplet_factor,
)

_VARIANT_RE = re.compile(r"^\|(\d)$")


@dataclass(frozen=True)
class NoteEvent:
    """One sounding note (or rest when pitch is None), in whole-note units."""

    pitch: int | None
    onset: Fraction
    duration: Fraction


@dataclass(frozen=True)
class MeasureReport:
    nominal: Fraction
    actual: Fraction
    classification: str  # full | pickup | complement | short | long


@dataclass
class MeasureValidation:
    measures: list[MeasureReport]

    @property
    def error_count(self) -> int:
        return sum(1 for m in self.measures if m.classification in ("short", "long"))


@dataclass(frozen=True)
class Section:
    bar_count: int
    repeated: bool
    content_hash: str


@dataclass
class SectionStructure:
    sections: list[Section]
    aabb8: bool


@dataclass(frozen=True)
class StructError:
    kind: str  # repeated_first_ending | lone_variant_ending | unmatched_chord_close | unbalanced_repeat
    position: int


def _is_structural(t: Token) -> bool:
    return t.kind is TokenKind.MEASURE and t.text not in ("[", "]")


@dataclass
class _PlayedSection:
    passes: list[list[list[Token]]]  # pass -> bar -> tokens
    repeated: bool


def _play(seq: TokenSeq) -> list[_PlayedSection]:
    """Run the repeat machine, yielding sections of played-out passes."""
    body = seq[3:-1]
    n = len(body)
    sections: list[_PlayedSection] = []
    passes: list[list[list[Token]]] = []
    bars: list[list[Token]] = []
    bar: list[Token] = []
    pass_no = 1
    anchor = 0
    repeated_flag = False
    pending_close = False
    steps = 0
    limit = 20 * n + 200

    def close_bar() -> None:
        nonlocal bar
        if bar:
            bars.append(bar)
            bar = []

    def close_pass() -> None:
        nonlocal bars
        close_bar()
        if bars:
            passes.append(bars)
            bars = []

    def close_section(repeated: bool) -> None:
        nonlocal passes, repeated_flag
        close_pass()
        if passes:
            sections.append(_PlayedSection(passes=passes, repeated=repeated))
            passes = []
        repeated_flag = False

    i = 0
    while i < n:
        steps += 1
        if steps > limit:
            raise UnsupportedStructureError("repeat expansion did not terminate")
        t = body[i]
        if not _is_structural(t):
            bar.append(t)
            i += 1
            continue
        text = t.text
        if pending_close:
            close_section(repeated=True)
            pending_close = False
            if text == "|":
                anchor = i + 1
                i += 1
                continue
            anchor = i + 1  # the token below may move it again
        if text == "|":
            close_bar()
            i += 1
            continue
        if text == "|:":
            close_section(repeated=repeated_flag)
            anchor = i + 1
            pass_no = 1
            i += 1
            continue
        if text == ":|":
            if pass_no == 1:
                close_pass()
                pass_no = 2
                repeated_flag = True
                i = anchor
                continue
            close_section(repeated=True)
            pass_no = 1
            anchor = i + 1
            i += 1
            continue
        m = _VARIANT_RE.match(text)
        if m is not None:
            if pass_no == 2 and m.group(1) == "1":
                # second pass skips the first ending: resume past the :| (+ |2)
                j = i + 1
                while j < n and body[j].text != ":|":
                    j += 1
                if j == n:  # no closing sign; treat the ending marker as a barline
                    close_bar()
                    i += 1
                    continue
                j += 1
                if j < n and _VARIANT_RE.match(body[j].text):
                    j += 1
                close_bar()
                anchor = j
                pass_no = 1
                pending_close = True
                i = j
                continue
            close_bar()
            if m.group(1) != "1" and pass_no == 1:
                # a second ending reached linearly acts as a section-ish boundary
                anchor = i + 1
            i += 1
            continue
        close_bar()
        i += 1
    close_bar()
    if pending_close:
        close_section(repeated=True)
    else:
        close_section(repeated=repeated_flag)
    return sections


def _flat_bars(sections: list[_PlayedSection]) -> list[list[Token]]:
    return [b for sec in sections for p in sec.passes for b in p]


def expand_repeats(seq: TokenSeq) -> TokenSeq:
    """Play out all repeats; only plain barlines remain in the result."""
    body = seq[3:-1]
    sections = _play(seq)
    bars = _flat_bars(sections)
    out: TokenSeq = list(seq[:3])
    bar_tok = Token(TokenKind.MEASURE, "|")
    if body and _is_structural(body[0]):
        out.append(bar_tok)
    for k, b in enumerate(bars):
        if k:
            out.append(bar_tok)
        out.extend(b)
    if bars and body and _is_structural(body[-1]):
        out.append(bar_tok)
    out.append(seq[-1])
    return out


# ---------------------------------------------------------------------------
# Timed interpretation
# ---------------------------------------------------------------------------


def _is_compound(meter: Fraction, meter_text: str) -> bool:
    m = re.match(r"^M:(\d+)/(\d+)$", meter_text)
    if m is None:
        return False
    return int(m.group(2)) == 8 and int(m.group(1)) in (6, 9, 12)


class _Unit:
    """One rhythmic unit inside a bar: a note, rest, or chord."""

    __slots__ = ("notes", "advance")

    def __init__(self, notes: list[tuple[int | None, str, int, Fraction]], advance: Fraction):
        self.notes = notes  # (explicit alter | None, letter or "" for rest, octave, duration)
        self.advance = advance


def _iter_units(bar: list[Token], compound: bool):
    """Group a bar's tokens into rhythmic units, applying tuplet scaling."""
    units: list[_Unit] = []
    tuplet_left = 0
    tuplet_scale = Fraction(1)
    i = 0
    n = len(bar)

    def next_duration(j: int) -> tuple[Fraction, int]:
        if j < n and bar[j].kind is TokenKind.DURATION:
            return duration_value(bar[j].text), j + 1
        return Fraction(1), j

    while i < n:
        t = bar[i]
        if t.kind is TokenKind.GROUPING:
            count = int(t.text[1:])
            tuplet_left = count
            tuplet_scale = tuplet_factor(count, compound)
            i += 1
            continue
        if t.kind is TokenKind.MEASURE and t.text == "[":
            notes = []
            i += 1
            while i < n and not (bar[i].kind is TokenKind.MEASURE and bar[i].text == "]"):
                if bar[i].kind is not TokenKind.PITCH:
                    raise SemanticsError(f"unexpected token {bar[i].text!r} inside a chord")
                alter, letter, octave = (None, "", 0) if bar[i].text == "z" else pitch_fields(bar[i].text)
                dur, i = next_duration(i + 1)
                notes.append((alter, letter, octave, dur))
            # an unclosed chord ends with its bar
            outer, i = next_duration(i + 1) if i < n else (Fraction(1), n)
            scale = outer * (tuplet_scale if tuplet_left > 0 else 1)
            if tuplet_left > 0:
                tuplet_left -= 1
            notes = [(a, l, o, d * scale) for a, l, o, d in notes]
            advance = max((d for _, _, _, d in notes), default=Fraction(0))
            units.append(_Unit(notes, advance))
            continue
        if t.kind is TokenKind.PITCH:
            alter, letter, octave = (None, "", 0) if t.text == "z" else pitch_fields(t.text)
            dur, i = next_duration(i + 1)
            if tuplet_left > 0:
                dur *= tuplet_scale
                tuplet_left -= 1
            units.append(_Unit([(alter, letter, octave, dur)], dur))
            continue
        if t.kind is TokenKind.DURATION:
            raise SemanticsError(f"dangling duration token {t.text!r}")
        i += 1  # stray chord-close and similar leftovers carry no time
    return units


def _bar_length(bar: list[Token], unit: Fraction, compound: bool) -> Fraction:
    return sum((u.advance for u in _iter_units(bar, compound)), Fraction(0)) * unit


def to_note_events(seq: TokenSeq, unit: Fraction = Fraction(1, 8)) -> list[NoteEvent]:
    """Timed events for a (repeat-expanded) sequence, honoring key signature
    and measure-scoped accidental persistence."""
    key = parse_key(seq[2].text)
    sig = key.signature()
    meter_text = seq[1].text
    compound = _is_compound(meter_fraction(meter_text), meter_text)

    events: list[NoteEvent] = []
    onset = Fraction(0)
    state: dict[tuple[str, int], int] = {}
    bar: list[Token] = []

    def flush_bar() -> None:
        nonlocal onset
        for u in _iter_units(bar, compound):
            for alter, letter, octave, dur in u.notes:
                if letter == "":
                    events.append(NoteEvent(None, onset, dur * unit))
                    continue
                eff = alter if alter is not None else state.get((letter, octave), sig[letter])
                if alter is not None:
                    state[(letter, octave)] = alter
                events.append(NoteEvent(sounding_pitch(letter, octave, eff), onset, dur * unit))
            onset += u.advance * unit
        state.clear()
        bar.clear()

    for t in seq[3:-1]:
        if _is_structural(t):
            flush_bar()
        else:
            bar.append(t)
    flush_bar()
    return events


def validate_measures(seq: TokenSeq, unit: Fraction = Fraction(1, 8)) -> MeasureValidation:
    """Classify every played measure; a short opening and closing measure of a
    section pass pair up as pickup/complement when they sum to the nominal length."""
    nominal = meter_fraction(seq[1].text)
    compound = _is_compound(nominal, seq[1].text)
    reports: list[MeasureReport] = []
    for sec in _play(seq):
        for bars in sec.passes:
            lengths = [_bar_length(b, unit, compound) for b in bars]
            classes = ["full" if length == nominal else None for length in lengths]
            if (
                len(lengths) >= 2
                and lengths[0] < nominal
                and lengths[-1] < nominal
                and lengths[0] + lengths[-1] == nominal
            ):
                classes[0] = "pickup"
                classes[-1] = "complement"
            for length, cls in zip(lengths, classes):
                if cls is None:
                    cls = "short" if length < nominal else "long"
                reports.append(MeasureReport(nominal, length, cls))
    return MeasureValidation(reports)


# ---------------------------------------------------------------------------
# Structure
# ---------------------------------------------------------------------------


def _bar_key(bar: list[Token]) -> tuple[str, ...]:
    return tuple(t.text for t in bar)


def _hash_bars(bars: list[list[Token]]) -> str:
    joined = "\x1f".join(" ".join(k) for k in map(_bar_key, bars))
    return hashlib.sha1(joined.encode("utf-8")).hexdigest()[:12]


def detect_structure(seq: TokenSeq) -> SectionStructure:
    """Section layout plus the AABB-with-8-bar-sections flag.

    The flag is true either when repeat signs state two 8-bar sections twice,
    or when the played-out bars form the explicit 32-bar AABB pattern.
    """
    played = _play(seq)
    sections = [
        Section(
            bar_count=len(sec.passes[0]) if sec.passes else 0,
            repeated=sec.repeated,
            content_hash=_hash_bars(sec.passes[0]) if sec.passes else "",
        )
        for sec in played
    ]
    by_repeats = len(played) == 2 and all(
        sec.repeated and all(len(p) == 8 for p in sec.passes) for sec in played
    )
    bars = [_bar_key(b) for b in _flat_bars(played)]
    explicit = (
        len(bars) == 32
        and bars[0:8] == bars[8:16]
        and bars[16:24] == bars[24:32]
    )
    return SectionStructure(sections=sections, aabb8=by_repeats or explicit)


# ---------------------------------------------------------------------------
# Error census
# ---------------------------------------------------------------------------


def find_errors(seq: TokenSeq) -> list[StructError]:
    """Structural defects of the kinds surveyed over generated transcriptions."""
    errors: list[StructError] = []
    variants = [
        (i, t.text) for i, t in enumerate(seq) if t.kind is TokenKind.MEASURE and _VARIANT_RE.match(t.text)
    ]
    for (_, v1), (i2, v2) in zip(variants, variants[1:]):
        if v1 == "|1" and v2 == "|1":
            errors.append(StructError("repeated_first_ending", i2))
    if len(variants) == 1:
        errors.append(StructError("lone_variant_ending", variants[0][0]))

    depth = 0
    for i, t in enumerate(seq):
        if t.kind is not TokenKind.MEASURE:
            continue
        if t.text == "[":
            depth += 1
        elif t.text == "]":
            if depth == 0:
                errors.append(StructError("unmatched_chord_close", i))
            else:
                depth -= 1
        else:
            depth = 0  # chords do not span barlines

    opens = [i for i, t in enumerate(seq) if t.kind is TokenKind.MEASURE and t.text == "|:"]
    closes = [i for i, t in enumerate(seq) if t.kind is TokenKind.MEASURE and t.text == ":|"]
    for k, i in enumerate(opens):
        boundary = opens[k + 1] if k + 1 < len(opens) else len(seq)
        if not any(i < j < boundary for j in closes):
            errors.append(StructError("unbalanced_repeat", i))
    errors.sort(key=lambda e: e.position)
    return errors
