"""Descriptive statistics over corpora and training-vs-generated comparison."""

from __future__ import annotations

from collections import Counter
from dataclasses import dataclass

from .corpus import TokenCorpus
from .errors import TuneLmError
from .keys import MODE_ABBREV
from .score import detect_structure, find_errors
from .tokens import TokenKind, validate_grammar

DEFAULT_BIN_WIDTH = 10

_ABBREV_TO_MODE = {v: k for k, v in MODE_ABBREV.items()}


@dataclass
class Histogram:
    bin_width: int
    counts: dict[int, int]  # bin lower edge -> count

    @property
    def total(self) -> int:
        return sum(self.counts.values())

    def proportions(self) -> dict[int, float]:
        n = self.total
        return {k: v / n for k, v in sorted(self.counts.items())}


@dataclass
class CorpusStats:
    length_histogram: Histogram
    ending_pitch: dict[str, float]
    meter_proportions: dict[str, float]
    mode_proportions: dict[str, float]
    aabb8_rate: float
    error_counts: dict[str, int]
    transcription_count: int


def length_histogram(corpus: TokenCorpus, bin_width: int = DEFAULT_BIN_WIDTH) -> Histogram:
    """Token counts per transcription (delimiters included), binned."""
    if not corpus.transcriptions:
        raise TuneLmError("empty corpus has no length distribution")
    counts: Counter = Counter()
    for seq in corpus.transcriptions:
        counts[(len(seq) // bin_width) * bin_width] += 1
    return Histogram(bin_width=bin_width, counts=dict(counts))


def length_percentile(corpus: TokenCorpus, q: float) -> int:
    """Nearest-rank percentile of transcription token counts."""
    lengths = sorted(len(seq) for seq in corpus.transcriptions)
    if not lengths:
        raise TuneLmError("empty corpus")
    rank = max(1, int(round(q / 100.0 * len(lengths))))
    return lengths[rank - 1]


def ending_pitch_distribution(corpus: TokenCorpus) -> tuple[dict[str, float], int]:
    """Proportion of transcriptions ending on each pitch token.

    Grammar-invalid transcriptions are skipped; the skip count is returned.
    """
    counts: Counter = Counter()
    skipped = 0
    for seq in corpus.transcriptions:
        if not validate_grammar(seq).ok:
            skipped += 1
            continue
        final = next(
            (t.text for t in reversed(seq) if t.kind is TokenKind.PITCH), None
        )
        if final is None:
            skipped += 1
            continue
        counts[final] += 1
    total = sum(counts.values())
    return ({k: v / total for k, v in sorted(counts.items())} if total else {}), skipped


def mode_meter_proportions(corpus: TokenCorpus) -> tuple[dict[str, float], dict[str, float]]:
    """Fraction of transcriptions per mode and per meter token."""
    modes: Counter = Counter()
    meters: Counter = Counter()
    for seq in corpus.transcriptions:
        for t in seq:
            if t.kind is TokenKind.KEY:
                abbrev = t.text[2:][1:].lstrip("#b")
                modes[_ABBREV_TO_MODE.get(abbrev, abbrev)] += 1
                break
        for t in seq:
            if t.kind is TokenKind.METER:
                meters[t.text] += 1
                break
    n_modes = sum(modes.values())
    n_meters = sum(meters.values())
    return (
        {k: v / n_modes for k, v in sorted(modes.items())} if n_modes else {},
        {k: v / n_meters for k, v in sorted(meters.items())} if n_meters else {},
    )


def structure_rate(corpus: TokenCorpus) -> float:
    """Fraction of transcriptions with the two-repeated-8-bar-sections shape."""
    if not corpus.transcriptions:
        return 0.0
    hits = sum(1 for seq in corpus.transcriptions if detect_structure(seq).aabb8)
    return hits / len(corpus.transcriptions)


def error_census(corpus: TokenCorpus) -> dict[str, int]:
    """Transcriptions per structural-error kind (each counted once per kind)."""
    counts: Counter = Counter()
    for seq in corpus.transcriptions:
        kinds = {e.kind for e in find_errors(seq)}
        for kind in kinds:
            counts[kind] += 1
    return dict(counts)


def corpus_stats(corpus: TokenCorpus, bin_width: int = DEFAULT_BIN_WIDTH) -> CorpusStats:
    ending, _ = ending_pitch_distribution(corpus)
    modes, meters = mode_meter_proportions(corpus)
    return CorpusStats(
        length_histogram=length_histogram(corpus, bin_width),
        ending_pitch=ending,
        meter_proportions=meters,
        mode_proportions=modes,
        aabb8_rate=structure_rate(corpus),
        error_counts=error_census(corpus),
        transcription_count=len(corpus.transcriptions),
    )


def total_variation(p: dict, q: dict) -> float:
    keys = set(p) | set(q)
    return 0.5 * sum(abs(p.get(k, 0.0) - q.get(k, 0.0)) for k in keys)


@dataclass
class ComparisonReport:
    distances: dict[str, float]
    tables: dict[str, list[tuple[str, float, float]]]

    def to_text(self) -> str:
        lines = ["statistic\ttotal_variation"]
        for name, d in self.distances.items():
            lines.append(f"{name}\t{d:.6f}")
        for name, rows in self.tables.items():
            lines.append("")
            lines.append(f"[{name}]\tbin\tleft\tright")
            for key, a, b in rows:
                lines.append(f"\t{key}\t{a:.6f}\t{b:.6f}")
        return "\n".join(lines) + "\n"


def compare(a: CorpusStats, b: CorpusStats) -> ComparisonReport:
    """Per-statistic total-variation distances plus side-by-side tables."""
    if a.length_histogram.bin_width != b.length_histogram.bin_width:
        raise TuneLmError("histogram bin widths differ; rebuild with matching binning")
    pairs = {
        "length": (
            {str(k): v for k, v in a.length_histogram.proportions().items()},
            {str(k): v for k, v in b.length_histogram.proportions().items()},
        ),
        "ending_pitch": (a.ending_pitch, b.ending_pitch),
        "meter": (a.meter_proportions, b.meter_proportions),
        "mode": (a.mode_proportions, b.mode_proportions),
        "aabb8": ({"aabb8": a.aabb8_rate}, {"aabb8": b.aabb8_rate}),
    }
    distances = {}
    tables = {}
    for name, (pa, pb) in pairs.items():
        distances[name] = total_variation(pa, pb)
        keys = sorted(set(pa) | set(pb))
        tables[name] = [(k, pa.get(k, 0.0), pb.get(k, 0.0)) for k in keys]
    return ComparisonReport(distances=distances, tables=tables)


def stats_to_csv(stats: CorpusStats) -> str:
    """Rows of (statistic, bin, value) for external plotting."""
    rows = ["statistic,bin,value"]
    for k, v in stats.length_histogram.proportions().items():
        rows.append(f"length,{k},{v:.8f}")
    for k, v in stats.ending_pitch.items():
        rows.append(f"ending_pitch,{k},{v:.8f}")
    for k, v in stats.meter_proportions.items():
        rows.append(f"meter,{k},{v:.8f}")
    for k, v in stats.mode_proportions.items():
        rows.append(f"mode,{k},{v:.8f}")
    rows.append(f"aabb8,rate,{stats.aabb8_rate:.8f}")
    for k, v in sorted(stats.error_counts.items()):
        rows.append(f"errors,{k},{v}")
    rows.append(f"count,transcriptions,{stats.transcription_count}")
    return "\n".join(rows) + "\n"
