"""Key signatures: parsing key fields, circle-of-fifths signatures, spelling.

A key is a root pitch class plus a mode. The written root name ("Bb", "F#")
is kept alongside the pitch class so signatures and respelling stay exact
for enharmonic roots.
"""

from __future__ import annotations

import re
from dataclasses import dataclass

from .errors import UnparseableKeyError

LETTERS = "CDEFGAB"
LETTER_PC = {"C": 0, "D": 2, "E": 4, "F": 5, "G": 7, "A": 9, "B": 11}

# Order in which sharps/flats enter a signature as the fifths count grows.
SHARP_ORDER = "FCGDAEB"
FLAT_ORDER = "BEADGCF"

# Fifths position of the major key built on each natural letter.
_LETTER_FIFTHS = {"F": -1, "C": 0, "G": 1, "D": 2, "A": 3, "E": 4, "B": 5}

# Offset (in fifths) of each mode relative to the major key on the same root.
MODE_FIFTHS = {
    "major": 0,
    "mixolydian": -1,
    "dorian": -2,
    "minor": -3,
    "lydian": 1,
    "phrygian": -4,
    "locrian": -5,
}

MODE_ABBREV = {
    "major": "maj",
    "minor": "min",
    "dorian": "dor",
    "mixolydian": "mix",
    "lydian": "lyd",
    "phrygian": "phr",
    "locrian": "loc",
}

_MODE_WORDS = {
    "": "major",
    "maj": "major",
    "major": "major",
    "ionian": "major",
    "m": "minor",
    "min": "minor",
    "minor": "minor",
    "aeolian": "minor",
    "dor": "dorian",
    "dorian": "dorian",
    "mix": "mixolydian",
    "mixolydian": "mixolydian",
    "lyd": "lydian",
    "lydian": "lydian",
    "phr": "phrygian",
    "phrygian": "phrygian",
    "loc": "locrian",
    "locrian": "locrian",
}

# Preferred spelling for each root pitch class (fewest signature accidentals,
# sharp side wins the F#/Gb tie).
_PREFERRED_ROOT_NAME = {
    0: "C", 1: "Db", 2: "D", 3: "Eb", 4: "E", 5: "F",
    6: "F#", 7: "G", 8: "Ab", 9: "A", 10: "Bb", 11: "B",
}

_KEY_RE = re.compile(r"^([A-Ga-g])([#b])?\s*(.*)$")


@dataclass(frozen=True)
class KeySpec:
    """Root pitch class (0-11, C=0) plus mode, with the written root name."""

    root: int
    mode: str
    root_name: str = ""

    def __post_init__(self):
        if not self.root_name:
            object.__setattr__(self, "root_name", _PREFERRED_ROOT_NAME[self.root % 12])

    def __eq__(self, other):
        if not isinstance(other, KeySpec):
            return NotImplemented
        return self.root == other.root and self.mode == other.mode

    def __hash__(self):
        return hash((self.root, self.mode))

    @property
    def fifths(self) -> int:
        """Signature position on the circle of fifths (sharps > 0 > flats)."""
        letter = self.root_name[0].upper()
        base = _LETTER_FIFTHS[letter]
        if len(self.root_name) > 1:
            base += 7 if self.root_name[1] == "#" else -7
        return base + MODE_FIFTHS[self.mode]

    def signature(self) -> dict[str, int]:
        """Per-letter alteration implied by the key signature (-1, 0, +1)."""
        sig = {letter: 0 for letter in LETTERS}
        f = self.fifths
        if f > 0:
            for letter in SHARP_ORDER[:f]:
                sig[letter] = 1
        elif f < 0:
            for letter in FLAT_ORDER[:-f]:
                sig[letter] = -1
        return sig

    def abbrev(self) -> str:
        """Short display form, e.g. "Amix", "Dmaj"."""
        return self.root_name + MODE_ABBREV[self.mode]

    def token_text(self) -> str:
        """Key token text, e.g. "K:Cmix"."""
        return "K:" + self.abbrev()


def parse_key(key_text: str) -> KeySpec:
    """Interpret a key field such as "Amixolydian", "Ador", "Dmaj" or "K:Cmin"."""
    text = key_text.strip()
    if text.upper().startswith("K:"):
        text = text[2:].strip()
    if not text:
        raise UnparseableKeyError(f"empty key field: {key_text!r}")
    m = _KEY_RE.match(text)
    if m is None:
        raise UnparseableKeyError(f"unrecognized key field: {key_text!r}")
    letter, accidental, mode_word = m.groups()
    mode = _MODE_WORDS.get(mode_word.strip().lower())
    if mode is None:
        raise UnparseableKeyError(f"unrecognized mode in key field: {key_text!r}")
    root = LETTER_PC[letter.upper()]
    name = letter.upper()
    if accidental == "#":
        root = (root + 1) % 12
        name += "#"
    elif accidental == "b":
        root = (root - 1) % 12
        name += "b"
    return KeySpec(root=root, mode=mode, root_name=name)


def shift_to_c(root: int) -> int:
    """Semitone shift moving a root to C, in the range -5..+6 (ties go up)."""
    return ((-root + 5) % 12) - 5
