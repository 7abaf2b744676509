"""Tokenizer, transposer, vocabulary, and grammar checks."""

from __future__ import annotations

import random

import pytest

from conftest import CUP_BODY_DOR, CUP_BODY_MIX, CUP_TOKENS_DOR, CUP_TOKENS_MIX
from tunelm.errors import TokenizeError, UnparseableKeyError, VocabularyError
from tunelm.keys import KeySpec, parse_key, shift_to_c
from tunelm.tokens import (
    END_TOKEN,
    START_TOKEN,
    TokenKind,
    Vocabulary,
    build_vocabulary,
    detokenize,
    parse_abc_text,
    seq_from_text,
    seq_to_text,
    strip_ornaments,
    token,
    tokenize_body,
    transpose,
    validate_grammar,
)


class TestParseKey:
    def test_long_mixolydian(self):
        k = parse_key("Amixolydian")
        assert k.root == 9 and k.mode == "mixolydian"

    def test_identity_root(self):
        k = parse_key("Cmaj")
        assert k.root == 0 and k.mode == "major"

    def test_short_dorian(self):
        k = parse_key("Ador")
        assert k.root == 9 and k.mode == "dorian"

    def test_prefix_and_minor(self):
        k = parse_key("K:Cmin")
        assert k.root == 0 and k.mode == "minor"

    def test_accidental_roots(self):
        assert parse_key("Bbmajor").root == 10
        assert parse_key("F#dorian").root == 6

    def test_bare_letter_is_major(self):
        assert parse_key("D").mode == "major"

    def test_unknown_mode_raises(self):
        with pytest.raises(UnparseableKeyError):
            parse_key("Cwhatever")
        with pytest.raises(UnparseableKeyError):
            parse_key("")

    def test_signatures(self):
        assert parse_key("Amix").signature() == {
            "C": 1, "D": 0, "E": 0, "F": 1, "G": 0, "A": 0, "B": 0,
        }
        assert parse_key("Cmix").signature()["B"] == -1
        assert parse_key("Cdor").signature()["E"] == -1
        assert parse_key("Ador").signature() == {
            "C": 0, "D": 0, "E": 0, "F": 1, "G": 0, "A": 0, "B": 0,
        }

    def test_shift_to_c(self):
        assert shift_to_c(9) == 3  # A up a minor third
        assert shift_to_c(0) == 0
        assert shift_to_c(2) == -2  # D down a whole step
        assert shift_to_c(6) == 6  # tritone resolves upward


class TestTokenizeCupOfTea:
    def test_mixolydian_setting_matches_published_tokens(self):
        key = parse_key("Amixolydian")
        seq = tokenize_body(CUP_BODY_MIX, "4/4", key)
        assert seq_to_text(transpose(seq, key)) == CUP_TOKENS_MIX

    def test_dorian_setting_matches_published_tokens(self):
        key = parse_key("Adorian")
        body, _ = strip_ornaments(CUP_BODY_DOR)
        seq = tokenize_body(body, "4/4", key)
        assert seq_to_text(transpose(seq, key)) == CUP_TOKENS_DOR

    def test_pre_transposition_header(self):
        key = parse_key("Adorian")
        body, _ = strip_ornaments(CUP_BODY_DOR)
        seq = tokenize_body(body, "4/4", key)
        assert seq_to_text(seq[:4]) == "<s> M:4/4 K:Ador e"
        # the raw ^c survives untransposed
        assert "^c" in [t.text for t in seq]


class TestTokenizeBasics:
    def test_lone_barline(self):
        seq = tokenize_body("|", "4/4", parse_key("Cmaj"))
        assert seq_to_text(seq) == "<s> M:4/4 K:Cmaj | <\\s>"

    def test_duration_split(self):
        seq = tokenize_body("g2", "4/4", parse_key("Cmaj"))
        assert [t.text for t in seq[3:-1]] == ["g", "2"]

    def test_fractional_durations(self):
        seq = tokenize_body("g/2 a/ b3/2 c//", "4/4", parse_key("Cmaj"))
        body = [t.text for t in seq[3:-1]]
        assert body == ["g", "/2", "a", "/2", "b", "3/2", "c", "/4"]

    def test_broken_rhythm_canonicalized(self):
        seq = tokenize_body("a>b", "4/4", parse_key("Cmaj"))
        assert [t.text for t in seq[3:-1]] == ["a", "3/2", "b", "/2"]
        seq = tokenize_body("a<b", "4/4", parse_key("Cmaj"))
        assert [t.text for t in seq[3:-1]] == ["a", "/2", "b", "3/2"]
        seq = tokenize_body("a2>b2", "4/4", parse_key("Cmaj"))
        assert [t.text for t in seq[3:-1]] == ["a", "3", "b"]  # 2*1/2 is the unit

    def test_variant_ending_splits(self):
        seq = tokenize_body("a:|2b", "4/4", parse_key("Cmaj"))
        assert [t.text for t in seq[3:-1]] == ["a", ":|", "|2", "b"]

    def test_bracket_variant_endings(self):
        seq = tokenize_body("a|[1b:|[2c||", "4/4", parse_key("Cmaj"))
        assert [t.text for t in seq[3:-1]] == ["a", "|1", "b", ":|", "|2", "c", "|"]

    def test_double_bar_collapses(self):
        seq = tokenize_body("a||b", "4/4", parse_key("Cmaj"))
        assert [t.text for t in seq[3:-1]] == ["a", "|", "b"]

    def test_double_bar_then_repeat_merges(self):
        seq = tokenize_body("a||\n|:b", "4/4", parse_key("Cmaj"))
        assert [t.text for t in seq[3:-1]] == ["a", "|:", "b"]

    def test_chord_tokens(self):
        seq = tokenize_body("[ce]2 d", "4/4", parse_key("Cmaj"))
        assert [t.text for t in seq[3:-1]] == ["[", "c", "e", "]", "2", "d"]

    def test_rest_and_octaves(self):
        seq = tokenize_body("z2 C, c'", "4/4", parse_key("Cmaj"))
        assert [t.text for t in seq[3:-1]] == ["z", "2", "C,", "c'"]

    def test_octave_mark_canonicalization(self):
        # c, sounds an octave below c, i.e. middle C, written C canonically
        seq = tokenize_body("c, C'", "4/4", parse_key("Cmaj"))
        assert [t.text for t in seq[3:-1]] == ["C", "c"]

    def test_meter_shorthand(self):
        seq = tokenize_body("a", "C", parse_key("Cmaj"))
        assert seq[1].text == "M:4/4"
        seq = tokenize_body("a", "C|", parse_key("Cmaj"))
        assert seq[1].text == "M:2/2"

    def test_unknown_character_names_position(self):
        with pytest.raises(TokenizeError) as err:
            tokenize_body("ab&cd", "4/4", parse_key("Cmaj"))
        assert err.value.position == 2

    def test_tuplet_extension_rejected(self):
        with pytest.raises(TokenizeError):
            tokenize_body("(3:2:2abc", "4/4", parse_key("Cmaj"))


class TestTranspose:
    def test_zero_shift_keeps_pitches(self):
        key = parse_key("Cmaj")
        seq = tokenize_body("CDEF GABc | ^f g2", "4/4", key)
        out = transpose(seq, key)
        assert [t.text for t in out[3:-1]] == [t.text for t in seq[3:-1]]
        assert out[2].text == "K:Cmaj"

    def test_signature_respelling_amix(self):
        # f sounds F# under the source signature and lands on a; g lands on
        # the flattened b of the target signature
        key = parse_key("Amixolydian")
        seq = tokenize_body("e A (3 AAA g2 fg", "4/4", key)
        out = transpose(seq, key)
        assert seq_to_text(out[3:-1]) == "g c (3 c c c b 2 a b"

    def test_explicit_natural_ador(self):
        # ^c sounds C#, lands on E natural; the C dorian signature has Eb,
        # so an explicit natural is required
        key = parse_key("Adorian")
        seq = tokenize_body("d2 ^c d", "4/4", key)
        out = transpose(seq, key)
        assert seq_to_text(out[3:-1]) == "f 2 =e f"

    def test_accidental_persistence_within_measure(self):
        # the second c inherits the sharp on the source side, and the written
        # natural persists on the target side, so no second accidental appears
        key = parse_key("Adorian")
        seq = tokenize_body("^c c | c", "4/4", key)
        out = transpose(seq, key)
        assert seq_to_text(out[3:-1]) == "=e e | e"

    def test_sounding_pitch_shift_is_uniform(self):
        from tunelm.score import to_note_events

        key = parse_key("Amixolydian")
        seq = tokenize_body(CUP_BODY_MIX, "4/4", key)
        out = transpose(seq, key)
        src = [e.pitch for e in to_note_events(seq) if e.pitch is not None]
        dst = [e.pitch for e in to_note_events(out) if e.pitch is not None]
        assert dst == [p + 3 for p in src]

    def test_kind_and_length_preserved(self):
        key = parse_key("Amixolydian")
        seq = tokenize_body(CUP_BODY_MIX, "4/4", key)
        out = transpose(seq, key)
        assert len(out) == len(seq)
        assert [t.kind for t in out] == [t.kind for t in seq]
        for a, b in zip(seq, out):
            if a.kind is not TokenKind.PITCH and a.kind is not TokenKind.KEY:
                assert a.text == b.text


def _random_valid_seq(rng: random.Random):
    """Small generator of grammar-valid, canonically spelled sequences."""
    pitches = ["C", "D", "E", "F", "G", "A", "B", "c", "d", "e", "f", "g", "a", "b", "c'", "G,", "z"]
    durs = ["2", "3", "/2", "3/2", "4"]
    parts = [START_TOKEN, "M:4/4", "K:Cmaj"]
    for bar in range(rng.randint(1, 6)):
        notes = rng.randint(1, 5)
        if rng.random() < 0.2:
            parts.append("(3")
            for _ in range(3):
                parts.append(rng.choice(pitches))
        for _ in range(notes):
            parts.append(rng.choice(pitches))
            if rng.random() < 0.4:
                parts.append(rng.choice(durs))
        parts.append("|")
    parts.append(END_TOKEN)
    return [token(t) for t in parts]


class TestRoundTrip:
    def test_detokenize_single_note(self):
        seq = seq_from_text("<s> M:4/4 K:Cmaj C 2 | <\\s>")
        text = detokenize(seq)
        assert "M: 4/4" in text and "L: 1/8" in text and "K: Cmaj" in text
        assert text.rstrip().endswith("C2|")

    def test_cup_of_tea_round_trips(self):
        for listing in (CUP_TOKENS_MIX, CUP_TOKENS_DOR):
            seq = seq_from_text(listing)
            text = detokenize(seq)
            tune = parse_abc_text(text)
            again = tokenize_body(tune.body, tune.meter, parse_key(tune.key_text))
            assert seq_to_text(again) == listing

    def test_random_sequences_are_fixed_points(self):
        rng = random.Random(20260810)
        for _ in range(200):
            seq = _random_valid_seq(rng)
            text = detokenize(seq)
            tune = parse_abc_text(text)
            again = tokenize_body(tune.body, tune.meter, parse_key(tune.key_text))
            assert seq_to_text(again) == seq_to_text(seq)


class TestVocabulary:
    def test_single_transcription_size(self):
        from tunelm.corpus import TokenCorpus

        corpus = TokenCorpus.from_text("<s> M:4/4 K:Cmaj C | <\\s>\n")
        vocab = build_vocabulary(corpus)
        assert vocab.size == 6

    def test_char_mode_counts_distinct_characters(self):
        from tunelm.corpus import CharCorpus

        corpus = CharCorpus(text="abcabc\n", entry_count=1)
        vocab = build_vocabulary(corpus)
        # independent set oracle
        assert vocab.size == len(set(corpus.text))

    def test_token_set_oracle(self):
        from tunelm.corpus import TokenCorpus

        corpus = TokenCorpus.from_text(
            "<s> M:4/4 K:Cmaj C D | E 2 <\\s>\n<s> M:6/8 K:Cdor z | C <\\s>\n"
        )
        vocab = build_vocabulary(corpus)
        oracle = set()
        for seq in corpus.transcriptions:
            for t in seq:
                oracle.add(t.text)
        assert vocab.size == len(oracle)
        assert set(vocab.entries) == oracle

    def test_bijection(self):
        vocab = Vocabulary.from_entries(["b", "a", "c"])
        assert vocab.entries == ("a", "b", "c")
        for i, t in enumerate(vocab.entries):
            assert vocab.encode(t) == i
            assert vocab.decode(i) == t

    def test_null_reservation(self):
        vocab = Vocabulary.from_entries(["a", "b"])
        with_null = vocab.with_null()
        assert with_null.size == 3
        assert with_null.decode(with_null.null_index) == "<null>"

    def test_empty_corpus_raises(self):
        with pytest.raises(VocabularyError):
            Vocabulary.from_entries([])

    def test_unknown_token_raises(self):
        vocab = Vocabulary.from_entries(["a"])
        with pytest.raises(VocabularyError):
            vocab.encode("q")


class TestGrammar:
    def test_published_listing_is_valid(self):
        assert validate_grammar(seq_from_text(CUP_TOKENS_MIX)).ok
        assert validate_grammar(seq_from_text(CUP_TOKENS_DOR)).ok

    def test_swapped_header_is_one_violation(self):
        seq = seq_from_text("<s> K:Cmaj M:4/4 C | <\\s>")
        report = validate_grammar(seq)
        assert [v.code for v in report.violations] == ["header-order"]

    def test_header_or_terminal_deletion_always_flags(self):
        base = seq_from_text(CUP_TOKENS_MIX)
        for idx in (0, 1, 2, len(base) - 1):
            mutated = base[:idx] + base[idx + 1 :]
            assert not validate_grammar(mutated).ok

    def test_random_deletions_of_structure_tokens(self):
        rng = random.Random(7)
        for _ in range(50):
            seq = _random_valid_seq(rng)
            for idx in (0, 1, 2, len(seq) - 1):
                mutated = seq[:idx] + seq[idx + 1 :]
                assert not validate_grammar(mutated).ok

    def test_duration_without_note_flags(self):
        seq = seq_from_text("<s> M:4/4 K:Cmaj 2 C <\\s>")
        report = validate_grammar(seq)
        assert any(v.code == "duration-context" for v in report.violations)

    def test_duration_after_chord_close_ok(self):
        seq = seq_from_text("<s> M:4/4 K:Cmaj [ C e ] 2 <\\s>")
        assert validate_grammar(seq).ok
