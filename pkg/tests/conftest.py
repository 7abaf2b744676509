"""Shared fixtures: the published Cup Of Tea listings and small corpus builders."""

from __future__ import annotations

import sys
from pathlib import Path

import pytest

sys.path.insert(0, str(Path(__file__).parent))

# The two dump records for tune 3038, with bodies spanning two lines.
CUP_BODY_MIX = (
    "|:eA (3AAA g2 fg|eA (3AAA BGGf|eA (3AAA g2 fg|1afge d2 gf:|2afge d2 cd||\n"
    "|:eaag efgf|eaag edBd|eaag efge|afge dgfg:|"
)
CUP_BODY_DOR = (
    "eAAa ~g2fg|eA~A2 BGBd|eA~A2 ~g2fg|1af (3gfe dG~G2:|2af (3gfe d2^cd||\n"
    "eaag efgf|eaag ed (3Bcd|eaag efgb|af (3gfe d2^cd:|"
)


def _csv_quote(value: str) -> str:
    return '"' + value.replace('"', '""') + '"'


def make_dump_record(
    tune_id: int,
    setting_id: int,
    title: str,
    tune_type: str,
    meter: str,
    key: str,
    body: str,
    date: str = "2003-08-28 21:31:44",
    user: str = "someone",
) -> str:
    fields = [str(tune_id), str(setting_id)] + [
        _csv_quote(v) for v in (title, tune_type, meter, key, body, date, user)
    ]
    return ",".join(fields)


CUP_RECORD_MIX = make_dump_record(
    3038, 3038, "A Cup Of Tea", "reel", "4/4", "Amixolydian", CUP_BODY_MIX, user="dafydd"
)
CUP_RECORD_DOR = make_dump_record(
    3038,
    21045,
    "A Cup Of Tea",
    "reel",
    "4/4",
    "Adorian",
    CUP_BODY_DOR,
    date="2013-02-24 13:45:39",
    user="sebastian the megafrog",
)

CUP_DUMP = CUP_RECORD_MIX + "\n" + CUP_RECORD_DOR + "\n"

# The reformatted five-field char-corpus block for the first setting.
CUP_CHAR_BLOCK_MIX = (
    "T: A Cup Of Tea\n"
    "M: 4/4\n"
    "L: 1/8\n"
    "K: Amix\n"
    "|:eA (3AAA g2 fg|eA (3AAA BGGf|eA (3AAA g2 fg|1afge d2 gf:|2afge d2 cd||\n"
    "|:eaag efgf|eaag edBd|eaag efge|afge dgfg:|"
)

# The published token listings after transposition to root C (single lines).
CUP_TOKENS_MIX = (
    "<s> M:4/4 K:Cmix |: g c (3 c c c b 2 a b | g c (3 c c c d B B a "
    "| g c (3 c c c b 2 a b |1 c' a b g f 2 b a :| |2 c' a b g f 2 e f "
    "|: g c' c' b g a b a | g c' c' b g f d f | g c' c' b g a b g "
    "| c' a b g f b a b :| <\\s>"
)

CUP_TOKENS_DOR = (
    "<s> M:4/4 K:Cdor g c c c' b 2 a b | g c c 2 d B d f | g c c 2 b 2 a b "
    "|1 c' a (3 b a g f B B 2 :| |2 c' a (3 b a g f 2 =e f | g c' c' b g a b a "
    "| g c' c' b g f (3 d e f | g c' c' b g a b d' | c' a (3 b a g f 2 =e f :| <\\s>"
)

# The char-model output analysed measure by measure in the write-up.
MALS_COPPORIM_ABC = """T: Mal's Copporim, The
M: 4/4
L: 1/8
K: Dmaj
|: a>g | f2 f>e d2 d>B | A>BA<F A2 d>e | f2 d>f e<ac>d | e>dc>B Agfe |
f2 f>e d2 d>B | A2 A>G F2 F2 | G2 B>A d2 c>d |[1 e>dc>A d2 :|[2 e2 d2 d2 ||
|: f<g | a>Ag>A f>Ae>A | d>gd>B d2 g>A | f>Af>e d>ed>c | e>ed>c (3Bcd (3efg |
a2 a>g f2 e2 | d2 A>d f2 f>g | a2 g>f e2 f>g | a2 A2 D2 ||
"""

# The two-bar composition seed used for the interactive loop.
BOBS_IDEA_SEED = """T: Bob's Idea
M: 4/4
L: 1/8
K: Cmaj
|: CcDB E^A=AF | d2 cB c2 E2 |
"""


@pytest.fixture
def cup_dump() -> str:
    return CUP_DUMP


@pytest.fixture
def cup_entries():
    from tunelm.ingest import parse_dump

    entries, tallies = parse_dump(CUP_DUMP)
    assert not tallies
    return entries


@pytest.fixture(scope="session")
def toy_token_model(tmp_path_factory):
    """A small token model trained on regular synthetic AABB tunes."""
    import random
    from types import SimpleNamespace

    from synthesis import make_training_corpus
    from tunelm.nn import LrSchedule, ModelConfig, train
    from tunelm.sampling import LoadedModel

    corpus = make_training_corpus(random.Random(77), count=60)
    cfg = ModelConfig(vocab_size=None, layers=1, hidden_size=32, dropout_rate=0.25)
    out = tmp_path_factory.mktemp("token_model")
    result = train(
        corpus, cfg, schedule=LrSchedule(base_lr=0.01), epochs=12, rng_seed=5,
        checkpoint_dir=out,
    )
    return SimpleNamespace(
        result=result,
        corpus=corpus,
        checkpoint=result.checkpoint_paths[-1],
        model=LoadedModel.from_checkpoint(result.checkpoint_paths[-1]),
    )


def build_char_fixture_corpus():
    """A char corpus whose vocabulary covers the composition-seed characters."""
    import random

    from synthesis import make_tune
    from tunelm.corpus import CharCorpus
    from tunelm.score import expand_repeats
    from tunelm.tokens import detokenize, parse_abc_text

    rng = random.Random(31)
    blocks = []
    titles = ["Bob's Idea", "The Quick Jig", "March of Days", "A Cup Of Tea"]
    for i in range(40):
        tune = make_tune(rng, shape="aabb8")
        body = parse_abc_text(detokenize(tune)).body
        if i % 3 == 0:
            body = body.replace("|", "|: ", 1).replace("C", "^C=A_B", 1)
        blocks.append(
            f"T: {titles[i % len(titles)]}\nM: 4/4\nL: 1/8\nK: Cmaj\n{body}"
        )
    text = "\n\n".join(blocks) + "\n"
    needed = set(BOBS_IDEA_SEED)
    missing = sorted(needed - set(text))
    if missing:
        text += "% " + "".join(missing) + "\n"
    return CharCorpus(text=text, entry_count=len(blocks))


@pytest.fixture(scope="session")
def toy_char_model(tmp_path_factory):
    """A small char model able to continue raw ABC text."""
    from types import SimpleNamespace

    from tunelm.nn import LrSchedule, ModelConfig, train
    from tunelm.sampling import LoadedModel

    corpus = build_char_fixture_corpus()
    cfg = ModelConfig(vocab_size=None, layers=1, hidden_size=48, dropout_rate=0.1, mode="char")
    out = tmp_path_factory.mktemp("char_model")
    result = train(
        corpus, cfg, schedule=LrSchedule(base_lr=0.01), epochs=10, rng_seed=9,
        batch_size=10, seq_len=50, checkpoint_dir=out,
    )
    return SimpleNamespace(
        result=result,
        corpus=corpus,
        checkpoint=result.checkpoint_paths[-1],
        model=LoadedModel.from_checkpoint(result.checkpoint_paths[-1]),
    )
