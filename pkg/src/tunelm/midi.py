"""Standard MIDI file output (format 0, one track, 480 ticks per quarter)."""

from __future__ import annotations

import struct
from typing import BinaryIO, Iterable

from .score import NoteEvent

TICKS_PER_QUARTER = 480
TICKS_PER_WHOLE = 4 * TICKS_PER_QUARTER
DEFAULT_TEMPO_BPM = 180  # session-speed reels
DEFAULT_VELOCITY = 90


def _varlen(value: int) -> bytes:
    """Variable-length quantity used for delta times."""
    if value < 0:
        raise ValueError("negative delta time")
    chunks = [value & 0x7F]
    value >>= 7
    while value:
        chunks.append((value & 0x7F) | 0x80)
        value >>= 7
    return bytes(reversed(chunks))


def write_midi(
    events: Iterable[NoteEvent],
    tempo_bpm: int = DEFAULT_TEMPO_BPM,
    program: int = 0,
    out: BinaryIO | None = None,
) -> bytes:
    """Serialize note events to a single-track SMF; rests emit no messages.

    Returns the file bytes; also writes them to ``out`` when given.
    """
    if tempo_bpm <= 0:
        raise ValueError("tempo must be positive")
    messages: list[tuple[int, int, bytes]] = []  # (tick, sort order, payload)
    tempo = round(60_000_000 / tempo_bpm)
    messages.append((0, 0, bytes((0xFF, 0x51, 0x03)) + tempo.to_bytes(3, "big")))
    messages.append((0, 0, bytes((0xC0, program & 0x7F))))
    for ev in events:
        if ev.pitch is None:
            continue
        if not 0 <= ev.pitch <= 127:
            raise ValueError(f"pitch {ev.pitch} outside MIDI range")
        on = round(ev.onset * TICKS_PER_WHOLE)
        off = round((ev.onset + ev.duration) * TICKS_PER_WHOLE)
        messages.append((on, 2, bytes((0x90, ev.pitch, DEFAULT_VELOCITY))))
        messages.append((off, 1, bytes((0x80, ev.pitch, 0))))
    messages.sort(key=lambda m: (m[0], m[1]))

    track = bytearray()
    clock = 0
    for tick, _, payload in messages:
        track += _varlen(tick - clock)
        track += payload
        clock = tick
    track += _varlen(0) + bytes((0xFF, 0x2F, 0x00))  # end of track

    header = b"MThd" + struct.pack(">IHHH", 6, 0, 1, TICKS_PER_QUARTER)
    blob = header + b"MTrk" + struct.pack(">I", len(track)) + bytes(track)
    if out is not None:
        out.write(blob)
    return blob
