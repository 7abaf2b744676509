"""ABC transcription tokens: the seven-kind vocabulary, tokenizer, transposer.

Token text follows the training-corpus conventions exactly: transcriptions are
wrapped in ``<s>`` / ``<\\s>``, durations are separate tokens after their pitch
(``g2`` becomes ``g 2``), broken rhythms are rewritten into explicit durations,
and runs of barline punctuation are canonicalized (``:|2`` splits into ``:|``
``|2``; a bare ``||`` collapses to ``|``).
"""

from __future__ import annotations

import enum
import re
from collections import Counter
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Iterable, Sequence

from .errors import (
    DetokenizeError,
    TokenizeError,
    TranspositionRangeError,
    VocabularyError,
)
from .keys import LETTER_PC, LETTERS, KeySpec, parse_key, shift_to_c

START_TOKEN = "<s>"
END_TOKEN = "<\\s>"
NULL_TOKEN = "<null>"

PITCH_LETTERS = "ABCDEFGabcdefg"

_ACC_TO_ALTER = {"^^": 2, "^": 1, "=": 0, "_": -1, "__": -2}
_ALTER_TO_ACC = {v: k for k, v in _ACC_TO_ALTER.items()}


class TokenKind(enum.Enum):
    TRANSCRIPTION = "transcription"
    METER = "meter"
    KEY = "key"
    MEASURE = "measure"
    PITCH = "pitch"
    GROUPING = "grouping"
    DURATION = "duration"


@dataclass(frozen=True)
class Token:
    kind: TokenKind
    text: str

    def __str__(self) -> str:
        return self.text


TokenSeq = list[Token]

_METER_RE = re.compile(r"^M:(\d+)/(\d+)$")
_KEY_TOKEN_RE = re.compile(r"^K:[A-G][#b]?(maj|min|dor|mix|lyd|phr|loc)$")
_VARIANT_RE = re.compile(r"^\|(\d)$")
_GROUPING_RE = re.compile(r"^\((\d)$")
_DURATION_RE = re.compile(r"^(\d+|/\d+|\d+/\d+)$")
_PITCH_RE = re.compile(r"^(\^{1,2}|_{1,2}|=)?([A-Ga-g])([,']*)$")
_REST_RE = re.compile(r"^z$")

_BAR_TEXTS = {"|", "|:", ":|", "[", "]"}


def classify(text: str) -> TokenKind:
    """Kind of a token given only its text; raises TokenizeError if unknown."""
    if text in (START_TOKEN, END_TOKEN):
        return TokenKind.TRANSCRIPTION
    if _METER_RE.match(text):
        return TokenKind.METER
    if _KEY_TOKEN_RE.match(text):
        return TokenKind.KEY
    if text in _BAR_TEXTS or _VARIANT_RE.match(text):
        return TokenKind.MEASURE
    if _GROUPING_RE.match(text):
        return TokenKind.GROUPING
    if _DURATION_RE.match(text):
        return TokenKind.DURATION
    if _PITCH_RE.match(text) or _REST_RE.match(text):
        return TokenKind.PITCH
    raise TokenizeError(f"unknown token text {text!r}")


def token(text: str) -> Token:
    return Token(classify(text), text)


def seq_to_text(seq: Sequence[Token]) -> str:
    return " ".join(t.text for t in seq)


def seq_from_text(line: str) -> TokenSeq:
    return [token(t) for t in line.split()]


def normalize_meter(meter: str) -> str:
    """Meter field to token text: "4/4" -> "M:4/4"; C and C| shorthands expand."""
    m = meter.strip()
    if m.upper().startswith("M:"):
        m = m[2:].strip()
    if m == "C":
        m = "4/4"
    elif m == "C|":
        m = "2/2"
    if not re.match(r"^\d+/\d+$", m):
        raise TokenizeError(f"unrecognized meter field {meter!r}")
    return "M:" + m


def meter_fraction(meter_token_text: str) -> Fraction:
    """Nominal measure length in whole notes for a meter token."""
    m = _METER_RE.match(meter_token_text)
    if m is None:
        raise TokenizeError(f"not a meter token: {meter_token_text!r}")
    return Fraction(int(m.group(1)), int(m.group(2)))


def duration_text(value: Fraction) -> str | None:
    """Token text for a duration multiplier; None when it is the unit (1)."""
    if value == 1:
        return None
    if value.denominator == 1:
        return str(value.numerator)
    if value.numerator == 1:
        return f"/{value.denominator}"
    return f"{value.numerator}/{value.denominator}"


def duration_value(text: str) -> Fraction:
    if text.startswith("/"):
        return Fraction(1, int(text[1:]))
    if "/" in text:
        num, den = text.split("/")
        return Fraction(int(num), int(den))
    return Fraction(int(text))


def pitch_fields(text: str) -> tuple[int | None, str, int]:
    """Split a pitch token into (explicit alter or None, letter, octave)."""
    m = _PITCH_RE.match(text)
    if m is None:
        raise TokenizeError(f"not a pitch token: {text!r}")
    acc, letter, marks = m.groups()
    octave = 4 if letter.isupper() else 5
    octave += marks.count("'") - marks.count(",")
    alter = _ACC_TO_ALTER[acc] if acc else None
    return alter, letter.upper(), octave


def pitch_text(alter: int | None, letter: str, octave: int) -> str:
    """Canonical pitch token text: lowercase + ' above octave 5, upper + , below 4."""
    if octave >= 5:
        body = letter.lower() + "'" * (octave - 5)
    else:
        body = letter.upper() + "," * (4 - octave)
    acc = _ALTER_TO_ACC[alter] if alter is not None else ""
    return acc + body


def sounding_pitch(letter: str, octave: int, alter: int) -> int:
    """Chromatic note number (middle C = 60)."""
    return 12 * (octave + 1) + LETTER_PC[letter] + alter


# ---------------------------------------------------------------------------
# Body cleaning (ornament stripping for the token pipeline)
# ---------------------------------------------------------------------------

_ORNAMENT_PATTERNS = [
    ("grace", re.compile(r"\{[^}]*\}")),
    ("decoration", re.compile(r"![^!\n]*!")),
    ("annotation", re.compile(r'"[^"\n]*"')),
    ("ornament", re.compile(r"~")),
    ("staccato", re.compile(r"\.")),
    ("slur", re.compile(r"\((?!\d)|\)")),
    ("tie", re.compile(r"-")),
]


def strip_ornaments(body: str) -> tuple[str, Counter]:
    """Remove ornaments/decorations that carry no pitch or duration content.

    Returns the cleaned body and a tally of what was removed.
    """
    removed: Counter = Counter()
    out = body
    for name, pattern in _ORNAMENT_PATTERNS:
        out, n = pattern.subn(" ", out)
        if n:
            removed[name] += n
    # Lone markers from unterminated spans are dropped too.
    for name, ch in (("decoration", "!"), ("annotation", '"')):
        n = out.count(ch)
        if n:
            removed[name] += n
            out = out.replace(ch, " ")
    return out, removed


# ---------------------------------------------------------------------------
# Tokenizer
# ---------------------------------------------------------------------------


def _cluster_tokens(cluster: str) -> list[str]:
    """Canonical measure tokens for one run of barline punctuation."""
    out: list[str] = []
    s = cluster.replace("]", "")  # thick final bars are decorative
    i, n = 0, len(s)
    if n and s[0] == ":":
        out.append(":|")
        i = 1
        if i < n and s[i] == "|":
            i += 1
    pending_bar = False
    while i < n:
        c = s[i]
        if c in "|[":
            if i + 1 < n and s[i + 1].isdigit():
                out.append("|" + s[i + 1])
                i += 2
                pending_bar = False
                continue
            if c == "|" and i + 1 < n and s[i + 1] == ":":
                j = i + 1
                while j < n and s[j] == ":":
                    j += 1
                out.append("|:")
                i = j
                pending_bar = False
                continue
            if c == "|":
                pending_bar = True
            i += 1
            continue
        if c == ":":
            j = i
            while j < n and s[j] == ":":
                j += 1
            out.append("|:")
            i = j
            pending_bar = False
            continue
        if c.isdigit():
            out.append("|" + c)
            i += 1
            pending_bar = False
            continue
        i += 1
    if pending_bar:
        out.append("|")
    return out


_WS = " \t\r\n"


def _barline_starts(body: str, i: int) -> bool:
    c = body[i]
    if c in "|:":
        return True
    if c == "[" and i + 1 < len(body) and (body[i + 1].isdigit() or body[i + 1] == "|"):
        return True
    return False


def _scan_cluster(body: str, i: int) -> tuple[str, int]:
    """Collect a maximal run of barline punctuation; whitespace inside is skipped."""
    chars: list[str] = []
    n = len(body)
    j = i
    while j < n:
        c = body[j]
        if c in "|:]":
            chars.append(c)
            j += 1
            continue
        if c == "[" and j + 1 < n and (body[j + 1].isdigit() or body[j + 1] == "|"):
            chars.append(c)
            j += 1
            continue
        if c.isdigit() and chars and chars[-1] in "|[":
            chars.append(c)
            j += 1
            continue
        if c in _WS:
            k = j
            while k < n and body[k] in _WS:
                k += 1
            if k < n and _barline_starts(body, k):
                j = k
                continue
            break
        break
    return "".join(chars), j


_DUR_RE = re.compile(r"(\d+)?(/+)?(\d+)?")


def _parse_duration(body: str, i: int) -> tuple[Fraction, int]:
    m = _DUR_RE.match(body, i)
    num_s, slashes, den_s = m.groups()
    if not num_s and not slashes:
        return Fraction(1), i
    num = int(num_s) if num_s else 1
    if slashes:
        den = int(den_s) if den_s else 2 ** len(slashes)
    else:
        den = 1
    return Fraction(num, den), m.end()


_PITCH_START_RE = re.compile(r"(\^{1,2}|_{1,2}|=)?([A-Ga-gzx])([,']*)")

# 3 notes in the time of 2, etc.; n=5,7,9 depend on compound vs simple meter.
_TUPLET_IN_TIME_OF = {2: 3, 3: 2, 4: 3, 6: 2, 8: 3}


def tuplet_factor(n: int, compound_meter: bool = False) -> Fraction:
    base = _TUPLET_IN_TIME_OF.get(n)
    if base is None:
        base = 3 if compound_meter else 2
    return Fraction(base, n)


class _Note:
    __slots__ = ("alter", "letter", "octave", "duration", "is_rest")

    def __init__(self, alter, letter, octave, duration, is_rest):
        self.alter = alter
        self.letter = letter
        self.octave = octave
        self.duration = duration
        self.is_rest = is_rest


def _scan_body(body: str) -> list:
    """Parse an ABC body into note/measure/grouping items with broken rhythms resolved."""
    items: list = []  # _Note | ("measure", text) | ("group", n) | ("chord_dur", Fraction)
    note_spans: list[tuple[int, int]] = []  # (start, end) item indexes of each note unit
    i, n = 0, len(body)
    pending_broken: Fraction | None = None
    chord_start: int | None = None

    def close_unit(start: int) -> None:
        note_spans.append((start, len(items)))

    while i < n:
        c = body[i]
        if c in _WS or c in "\\~.)-":
            i += 1
            continue
        if c == "{":
            j = body.find("}", i)
            if j == -1:
                raise TokenizeError("unterminated grace group", i)
            i = j + 1
            continue
        if c == "!":
            j = body.find("!", i + 1)
            if j == -1:
                raise TokenizeError("unterminated decoration", i)
            i = j + 1
            continue
        if c == '"':
            j = body.find('"', i + 1)
            if j == -1:
                raise TokenizeError("unterminated annotation", i)
            i = j + 1
            continue
        if c == "(":
            if i + 1 < n and body[i + 1].isdigit():
                if i + 2 < n and body[i + 2] == ":":
                    raise TokenizeError("extended tuplet notation unsupported", i)
                items.append(("group", int(body[i + 1])))
                i += 2
                continue
            i += 1  # slur open
            continue
        if _barline_starts(body, i):
            chord_start = None  # stray chord-opens die at the barline
            cluster, j = _scan_cluster(body, i)
            for text in _cluster_tokens(cluster):
                items.append(("measure", text))
            i = j
            continue
        if c == "[":
            items.append(("measure", "["))
            chord_start = len(items)
            i += 1
            continue
        if c == "]":
            # lone closes are kept as tokens so downstream checks can flag them
            items.append(("measure", "]"))
            dur, i2 = _parse_duration(body, i + 1)
            if i2 != i + 1:
                items.append(("chord_dur", dur))
            if chord_start is not None:
                close_unit(chord_start - 1)
                chord_start = None
            i = i2
            continue
        m = _PITCH_START_RE.match(body, i)
        if m is not None:
            acc, letter, marks = m.groups()
            is_rest = letter in "zx"
            if is_rest and acc:
                raise TokenizeError("accidental on a rest", i)
            octave = 0
            if not is_rest:
                octave = (4 if letter.isupper() else 5) + marks.count("'") - marks.count(",")
            dur, j = _parse_duration(body, m.end())
            if pending_broken is not None and chord_start is None:
                dur *= pending_broken
                pending_broken = None
            elif pending_broken is not None and chord_start is not None:
                # broken rhythm applies to every pitch of the chord it precedes
                dur *= pending_broken
            alter = _ACC_TO_ALTER[acc] if acc else None
            start = len(items)
            items.append(_Note(alter, None if is_rest else letter.upper(), octave, dur, is_rest))
            if chord_start is None:
                close_unit(start)
                pending_broken = None
            i = j
            continue
        if c in "<>":
            j = i
            while j < n and body[j] == c:
                j += 1
            depth = j - i
            if depth > 2:
                raise TokenizeError("broken rhythm deeper than <<", i)
            if c == ">":
                prev_f = Fraction(3, 2) if depth == 1 else Fraction(7, 4)
                next_f = Fraction(1, 2) if depth == 1 else Fraction(1, 4)
            else:
                prev_f = Fraction(1, 2) if depth == 1 else Fraction(1, 4)
                next_f = Fraction(3, 2) if depth == 1 else Fraction(7, 4)
            if not note_spans:
                raise TokenizeError("broken rhythm without preceding note", i)
            lo, hi = note_spans[-1]
            for item in items[lo:hi]:
                if isinstance(item, _Note):
                    item.duration *= prev_f
            pending_broken = next_f
            i = j
            continue
        raise TokenizeError(f"unexpected character {c!r}", i)
    if pending_broken is not None:
        raise TokenizeError("broken rhythm without following note", n - 1)
    return items


def _items_to_tokens(items: list) -> TokenSeq:
    out: TokenSeq = []
    for item in items:
        if isinstance(item, _Note):
            if item.is_rest:
                out.append(Token(TokenKind.PITCH, "z"))
            else:
                out.append(Token(TokenKind.PITCH, pitch_text(item.alter, item.letter, item.octave)))
            dtext = duration_text(item.duration)
            if dtext is not None:
                out.append(Token(TokenKind.DURATION, dtext))
        elif item[0] == "measure":
            out.append(Token(TokenKind.MEASURE, item[1]))
        elif item[0] == "group":
            out.append(Token(TokenKind.GROUPING, f"({item[1]}"))
        elif item[0] == "chord_dur":
            dtext = duration_text(item[1])
            if dtext is not None:
                out.append(Token(TokenKind.DURATION, dtext))
    return out


def tokenize_body(body: str, meter: str, key: KeySpec) -> TokenSeq:
    """Tokenize a cleaned ABC body, wrapped with header and terminal tokens."""
    seq = [
        Token(TokenKind.TRANSCRIPTION, START_TOKEN),
        Token(TokenKind.METER, normalize_meter(meter)),
        Token(TokenKind.KEY, key.token_text()),
    ]
    seq.extend(_items_to_tokens(_scan_body(body)))
    seq.append(Token(TokenKind.TRANSCRIPTION, END_TOKEN))
    return seq


# ---------------------------------------------------------------------------
# Transposition
# ---------------------------------------------------------------------------


def _letter_steps(root_letter: str, semitones: int) -> int:
    steps0 = (-LETTERS.index(root_letter)) % 7
    if semitones == 0 or steps0 == 0:
        return 0
    return steps0 if semitones > 0 else steps0 - 7


def transpose(seq: TokenSeq, from_key: KeySpec) -> TokenSeq:
    """Shift every pitch so the key root becomes C, respelling under the new signature.

    Sounding pitches are computed under the source signature with
    measure-scoped accidental persistence, then written under the target
    signature of (C, same mode), emitting explicit accidentals only where
    the target signature and earlier accidentals do not already produce
    the right pitch.
    """
    s = shift_to_c(from_key.root)
    target_key = KeySpec(root=0, mode=from_key.mode, root_name="C")
    if s == 0:
        return [
            Token(TokenKind.KEY, target_key.token_text()) if t.kind is TokenKind.KEY else t
            for t in seq
        ]
    steps = _letter_steps(from_key.root_name[0], s)
    src_sig = from_key.signature()
    tgt_sig = target_key.signature()
    src_state: dict[tuple[str, int], int] = {}
    tgt_state: dict[tuple[str, int], int] = {}
    out: TokenSeq = []
    for t in seq:
        if t.kind is TokenKind.KEY:
            out.append(Token(TokenKind.KEY, target_key.token_text()))
            continue
        if t.kind is TokenKind.MEASURE and t.text not in ("[", "]"):
            src_state.clear()
            tgt_state.clear()
            out.append(t)
            continue
        if t.kind is not TokenKind.PITCH or t.text == "z":
            out.append(t)
            continue
        alter, letter, octave = pitch_fields(t.text)
        src_alter = alter if alter is not None else src_state.get((letter, octave), src_sig[letter])
        if alter is not None:
            src_state[(letter, octave)] = alter
        target = sounding_pitch(letter, octave, src_alter) + s
        didx = octave * 7 + LETTERS.index(letter) + steps
        new_letter = LETTERS[didx % 7]
        new_octave = didx // 7
        need = target - sounding_pitch(new_letter, new_octave, 0)
        if abs(need) > 2:
            raise TranspositionRangeError(
                f"cannot respell {t.text} shifted {s:+d} semitones"
            )
        if not -1 <= new_octave <= 9:
            raise TranspositionRangeError(f"octave out of range for {t.text}")
        effective = tgt_state.get((new_letter, new_octave), tgt_sig[new_letter])
        if need == effective:
            out.append(Token(TokenKind.PITCH, pitch_text(None, new_letter, new_octave)))
        else:
            tgt_state[(new_letter, new_octave)] = need
            out.append(Token(TokenKind.PITCH, pitch_text(need, new_letter, new_octave)))
    return out


# ---------------------------------------------------------------------------
# Detokenization
# ---------------------------------------------------------------------------


def detokenize(seq: TokenSeq) -> str:
    """Render a grammar-valid token sequence back to an ABC text block."""
    report = validate_grammar(seq)
    if not report.ok:
        raise DetokenizeError(f"sequence is not grammar-valid: {report.violations[0].message}")
    meter = seq[1].text[2:]
    key = seq[2].text[2:]
    body = "".join(t.text for t in seq[3:-1])
    return f"X: 1\nM: {meter}\nL: 1/8\nK: {key}\n{body}\n"


@dataclass
class AbcTune:
    """Header fields plus raw body lines of one ABC text block."""

    title: str = ""
    meter: str = "4/4"
    unit: str = "1/8"
    key_text: str = "Cmaj"
    body: str = ""


def parse_abc_text(text: str) -> AbcTune:
    """Split an ABC block into header fields and body (K: ends the header)."""
    tune = AbcTune()
    lines = text.splitlines()
    body_start = 0
    seen_key = False
    for idx, line in enumerate(lines):
        stripped = line.strip()
        if not stripped:
            body_start = idx + 1
            continue
        m = re.match(r"^([A-Za-z]):\s*(.*)$", stripped)
        if m is None or seen_key:
            body_start = idx
            break
        field_name, value = m.group(1).upper(), m.group(2).strip()
        body_start = idx + 1
        if field_name == "T":
            tune.title = value
        elif field_name == "M":
            tune.meter = value
        elif field_name == "L":
            tune.unit = value
        elif field_name == "K":
            tune.key_text = value
            seen_key = True
    tune.body = "\n".join(lines[body_start:]).strip("\n")
    return tune


def tokenize_abc(text: str) -> tuple[TokenSeq, KeySpec]:
    """Tokenize a full ABC block (headers + body), stripping ornaments first."""
    tune = parse_abc_text(text)
    key = parse_key(tune.key_text)
    body, _ = strip_ornaments(tune.body)
    return tokenize_body(body, tune.meter, key), key


# ---------------------------------------------------------------------------
# Vocabulary
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class Vocabulary:
    """Bidirectional token-text <-> dense index map, lexicographically ordered."""

    entries: tuple[str, ...]
    null_index: int | None = None
    _index: dict = field(default_factory=dict, repr=False, compare=False)

    def __post_init__(self):
        self._index.update({t: i for i, t in enumerate(self.entries)})

    @classmethod
    def from_entries(cls, entries: Iterable[str], with_null: bool = False) -> "Vocabulary":
        uniq = set(entries)
        if not uniq:
            raise VocabularyError("cannot build a vocabulary from an empty corpus")
        if with_null:
            uniq.add(NULL_TOKEN)
        ordered = tuple(sorted(uniq))
        null_index = ordered.index(NULL_TOKEN) if with_null else None
        return cls(entries=ordered, null_index=null_index)

    @property
    def size(self) -> int:
        return len(self.entries)

    def __contains__(self, text: str) -> bool:
        return text in self._index

    def try_encode(self, text: str) -> int | None:
        return self._index.get(text)

    def encode(self, text: str) -> int:
        try:
            return self._index[text]
        except KeyError:
            raise VocabularyError(f"token {text!r} is not in the vocabulary") from None

    def decode(self, index: int) -> str:
        return self.entries[index]

    def encode_all(self, texts: Iterable[str]) -> list[int]:
        return [self.encode(t) for t in texts]

    def with_null(self) -> "Vocabulary":
        if self.null_index is not None:
            return self
        return Vocabulary.from_entries(self.entries, with_null=True)


def build_vocabulary(corpus) -> Vocabulary:
    """Distinct tokens (token corpus) or distinct characters (char corpus)."""
    transcriptions = getattr(corpus, "transcriptions", None)
    if transcriptions is not None:
        return Vocabulary.from_entries(t.text for seq in transcriptions for t in seq)
    text = corpus.text if hasattr(corpus, "text") else corpus
    return Vocabulary.from_entries(text)


# ---------------------------------------------------------------------------
# Grammar validation
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class GrammarViolation:
    code: str
    position: int
    message: str


@dataclass
class GrammarReport:
    violations: list[GrammarViolation]

    @property
    def ok(self) -> bool:
        return not self.violations


_BODY_KINDS = {TokenKind.MEASURE, TokenKind.PITCH, TokenKind.GROUPING, TokenKind.DURATION}


def validate_grammar(seq: TokenSeq) -> GrammarReport:
    """Report-only structural check: header order, body kinds, duration context, terminal."""
    v: list[GrammarViolation] = []

    def add(code: str, pos: int, msg: str) -> None:
        v.append(GrammarViolation(code, pos, msg))

    if not seq:
        add("empty", 0, "empty sequence")
        return GrammarReport(v)
    for i, t in enumerate(seq):
        try:
            classify(t.text)
        except TokenizeError:
            add("unknown-token", i, f"unknown token {t.text!r}")
    if seq[0].text != START_TOKEN:
        add("missing-start", 0, f"expected {START_TOKEN} first, got {seq[0].text!r}")
    header_swapped = (
        len(seq) > 2
        and seq[1].kind is TokenKind.KEY
        and seq[2].kind is TokenKind.METER
    )
    if header_swapped:
        add("header-order", 1, "meter and key tokens are swapped")
    else:
        if len(seq) < 2 or seq[1].kind is not TokenKind.METER:
            add("missing-meter", 1, "expected exactly one meter token after the start token")
        if len(seq) < 3 or seq[2].kind is not TokenKind.KEY:
            add("missing-key", 2, "expected exactly one key token after the meter token")
    if seq[-1].text != END_TOKEN:
        add("missing-end", len(seq) - 1, f"expected terminal {END_TOKEN}")
    body = seq[3:-1] if seq[-1].text == END_TOKEN else seq[3:]
    prev: Token | None = None
    for off, t in enumerate(body):
        pos = off + 3
        if t.kind not in _BODY_KINDS:
            add("body-kind", pos, f"token {t.text!r} not allowed in the body")
        if t.kind is TokenKind.DURATION:
            in_note_context = prev is not None and (
                (prev.kind is TokenKind.PITCH) or (prev.kind is TokenKind.MEASURE and prev.text == "]")
            )
            if not in_note_context:
                add("duration-context", pos, f"duration {t.text!r} does not follow a note")
        prev = t
    return GrammarReport(v)
