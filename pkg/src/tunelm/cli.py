"""Command-line entry points for the whole pipeline.

Subcommands: ingest, preprocess, train, sample, analyze, validate,
export-midi, serve. Machine-readable outputs go to files; a short summary
goes to standard output; any module error exits nonzero with its message.
"""

from __future__ import annotations

import argparse
import os
import sys
from pathlib import Path

from .errors import TuneLmError

PORT_ENV_VAR = "TUNELM_PORT"


def _tally_report(tallies) -> str:
    lines = ["reason\tcount"]
    for reason, count in sorted(tallies.items()):
        lines.append(f"{reason}\t{count}")
    return "\n".join(lines) + "\n"


def cmd_ingest(args) -> int:
    from .ingest import parse_dump

    with open(args.infile, encoding="utf-8", newline="") as fh:
        entries, tallies = parse_dump(fh)
    print(f"parsed {len(entries)} entries ({sum(tallies.values())} records skipped)")
    if args.report:
        Path(args.report).write_text(_tally_report(tallies))
        print(f"rejection report: {args.report}")
    return 0


def cmd_preprocess(args) -> int:
    from .ingest import (
        build_char_corpus,
        build_token_corpus,
        filter_for_tokens,
        parse_dump,
    )

    with open(args.infile, encoding="utf-8", newline="") as fh:
        entries, tallies = parse_dump(fh)
    if args.mode == "char":
        corpus, more = build_char_corpus(entries)
        tallies.update(more)
        Path(args.out).write_text(corpus.text, encoding="utf-8")
        print(f"char corpus: {corpus.entry_count} entries, {len(corpus.text)} characters -> {args.out}")
    else:
        kept, more = filter_for_tokens(entries)
        tallies.update(more)
        corpus = build_token_corpus(kept, explicit_repeats=args.explicit_repeats)
        Path(args.out).write_text(corpus.to_text(), encoding="utf-8")
        print(f"token corpus: {len(corpus.transcriptions)} transcriptions -> {args.out}")
    if args.report:
        Path(args.report).write_text(_tally_report(tallies))
        print(f"rejection report: {args.report}")
    return 0


def _load_corpus_for_mode(path: str, mode: str):
    from .corpus import CharCorpus, TokenCorpus

    text = Path(path).read_text(encoding="utf-8")
    if mode == "char":
        return CharCorpus(text=text, entry_count=text.count("\n\n") + 1)
    return TokenCorpus.from_text(text)


def cmd_train(args) -> int:
    import numpy as np

    from .nn import CHAR_SCHEDULE, TOKEN_SCHEDULE, LrSchedule, ModelConfig, train
    from .nn.checkpoint import load_checkpoint

    corpus = _load_corpus_for_mode(args.corpus, args.mode)
    config = ModelConfig(
        vocab_size=None,
        layers=args.layers,
        hidden_size=args.hidden,
        dropout_rate=args.dropout,
        mode=args.mode,
    )
    default = CHAR_SCHEDULE if args.mode == "char" else TOKEN_SCHEDULE
    schedule = LrSchedule(
        base_lr=args.lr if args.lr is not None else default.base_lr,
        decay=args.lr_decay if args.lr_decay is not None else default.decay,
        decay_after_epoch=(
            args.decay_after if args.decay_after is not None else default.decay_after_epoch
        ),
    )
    resume = load_checkpoint(args.resume) if args.resume else None
    result = train(
        corpus,
        config,
        schedule=schedule,
        epochs=args.epochs,
        rng_seed=args.seed,
        batch_size=args.batch_size,
        seq_len=args.seq_len,
        checkpoint_dir=args.out_dir,
        log=print,
        resume_from=resume,
        dtype=np.float32,
    )
    print(f"finished: {len(result.history)} epochs, checkpoints in {args.out_dir}")
    return 0


def cmd_sample(args) -> int:
    from .sampling import (
        GenerationConfig,
        LoadedModel,
        generate,
        generate_corpus,
        records_report,
    )

    model = LoadedModel.from_checkpoint(args.checkpoint)
    rng_seed = args.rng_seed if args.rng_seed is not None else 0
    config = GenerationConfig(
        seed=args.seed_text,
        temperature=args.temperature,
        max_steps=args.max_steps,
        rng_seed=rng_seed,
    )
    if model.mode == "token":
        corpus, records = generate_corpus(model, args.count, config)
        Path(args.out).write_text(corpus.to_text(), encoding="utf-8")
        valid = sum(1 for r in records if r.grammar_valid)
        print(f"generated {args.count} transcriptions ({valid} grammar-valid) -> {args.out}")
        if args.meta:
            Path(args.meta).write_text(records_report(records))
    else:
        blocks = []
        records = []
        for i in range(args.count):
            result = generate(model, config, stream=i)
            blocks.append(result.text)
            records.append(result)
        Path(args.out).write_text("\n\n".join(blocks) + "\n", encoding="utf-8")
        print(f"generated {args.count} char-mode continuations -> {args.out}")
        if args.meta:
            lines = ["index\tstop_reason\tlength"]
            lines += [f"{i}\t{r.stop_reason}\t{len(r.elements)}" for i, r in enumerate(records)]
            Path(args.meta).write_text("\n".join(lines) + "\n")
    return 0


def cmd_analyze(args) -> int:
    from .corpus import TokenCorpus
    from .stats import compare, corpus_stats, stats_to_csv

    corpus = TokenCorpus.from_text(Path(args.infile).read_text(encoding="utf-8"))
    stats = corpus_stats(corpus, bin_width=args.bin_width)
    Path(args.out).write_text(stats_to_csv(stats), encoding="utf-8")
    print(
        f"{stats.transcription_count} transcriptions; aabb8 rate {stats.aabb8_rate:.3f} -> {args.out}"
    )
    if args.compare:
        other = corpus_stats(
            TokenCorpus.from_text(Path(args.compare).read_text(encoding="utf-8")),
            bin_width=args.bin_width,
        )
        report = compare(stats, other)
        if args.compare_report:
            Path(args.compare_report).write_text(report.to_text(), encoding="utf-8")
        for name, distance in report.distances.items():
            print(f"  tv[{name}] = {distance:.4f}")
    return 0


def cmd_validate(args) -> int:
    from .corpus import TokenCorpus
    from .score import find_errors
    from .tokens import validate_grammar

    corpus = TokenCorpus.from_text(Path(args.infile).read_text(encoding="utf-8"))
    lines = []
    bad = 0
    for i, seq in enumerate(corpus.transcriptions):
        report = validate_grammar(seq)
        errors = find_errors(seq)
        if not report.ok or errors:
            bad += 1
        for v in report.violations:
            lines.append(f"{i}\tgrammar:{v.code}\t{v.position}")
        for e in errors:
            lines.append(f"{i}\t{e.kind}\t{e.position}")
    text = "\n".join(lines) + ("\n" if lines else "")
    if args.out:
        Path(args.out).write_text(text, encoding="utf-8")
    else:
        sys.stdout.write(text)
    print(f"{len(corpus.transcriptions)} transcriptions checked, {bad} with findings")
    return 0


def cmd_export_midi(args) -> int:
    from .midi import write_midi
    from .score import expand_repeats, to_note_events
    from .tokens import START_TOKEN, seq_from_text, tokenize_abc

    text = Path(args.infile).read_text(encoding="utf-8")
    stripped = text.strip()
    if stripped.startswith(START_TOKEN):
        lines = [l for l in stripped.splitlines() if l.strip()]
        if not 0 <= args.index < len(lines):
            raise TuneLmError(f"--index {args.index} out of range ({len(lines)} transcriptions)")
        seq = seq_from_text(lines[args.index])
    else:
        seq, _ = tokenize_abc(text)
    events = to_note_events(expand_repeats(seq))
    with open(args.out, "wb") as fh:
        write_midi(events, tempo_bpm=args.tempo, program=args.program, out=fh)
    print(f"{len([e for e in events if e.pitch is not None])} notes -> {args.out}")
    return 0


def cmd_serve(args) -> int:
    import uvicorn

    from .service import create_app, load_service_config

    models, config_port = load_service_config(args.config)
    port = args.port or int(os.environ.get(PORT_ENV_VAR, 0)) or config_port or 8000
    app = create_app(models)
    print(f"serving {len(models)} model(s) on port {port}")
    uvicorn.run(app, host=args.host, port=port, log_level="warning")
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="tunelm", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("ingest", help="parse a data dump and report record tallies")
    p.add_argument("--in", dest="infile", required=True)
    p.add_argument("--report")
    p.set_defaults(func=cmd_ingest)

    p = sub.add_parser("preprocess", help="build a char or token training corpus")
    p.add_argument("--mode", choices=("char", "token"), required=True)
    p.add_argument("--in", dest="infile", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--explicit-repeats", action="store_true")
    p.add_argument("--report")
    p.set_defaults(func=cmd_preprocess)

    p = sub.add_parser("train", help="train a language model on a corpus")
    p.add_argument("--mode", choices=("char", "token"), required=True)
    p.add_argument("--corpus", required=True)
    p.add_argument("--out-dir", required=True)
    p.add_argument("--epochs", type=int, default=100)
    p.add_argument("--layers", type=int, default=3)
    p.add_argument("--hidden", type=int, default=512)
    p.add_argument("--dropout", type=float, default=0.5)
    p.add_argument("--lr", type=float)
    p.add_argument("--lr-decay", type=float)
    p.add_argument("--decay-after", type=int)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--batch-size", type=int)
    p.add_argument("--seq-len", type=int, default=50)
    p.add_argument("--resume")
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("sample", help="generate transcriptions from a checkpoint")
    p.add_argument("--checkpoint", required=True)
    p.add_argument("--count", type=int, default=1)
    p.add_argument("--out", required=True)
    p.add_argument("--seed-text", default="")
    p.add_argument("--temperature", type=float, default=1.0)
    p.add_argument("--max-steps", type=int, default=400)
    p.add_argument("--rng-seed", type=int)
    p.add_argument("--meta", help="per-generation metadata sidecar")
    p.set_defaults(func=cmd_sample)

    p = sub.add_parser("analyze", help="corpus statistics (and optional comparison)")
    p.add_argument("--in", dest="infile", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--bin-width", type=int, default=10)
    p.add_argument("--compare", help="second corpus to compare against")
    p.add_argument("--compare-report")
    p.set_defaults(func=cmd_analyze)

    p = sub.add_parser("validate", help="grammar and structural-error report")
    p.add_argument("--in", dest="infile", required=True)
    p.add_argument("--out")
    p.set_defaults(func=cmd_validate)

    p = sub.add_parser("export-midi", help="write a standard MIDI file")
    p.add_argument("--in", dest="infile", required=True, help="ABC text or token corpus file")
    p.add_argument("--out", required=True)
    p.add_argument("--index", type=int, default=0, help="transcription line for token corpora")
    p.add_argument("--tempo", type=int, default=180)
    p.add_argument("--program", type=int, default=0)
    p.set_defaults(func=cmd_export_midi)

    p = sub.add_parser("serve", help="run the HTTP composition service")
    p.add_argument("--config", required=True, help="key=value file naming checkpoints and port")
    p.add_argument("--port", type=int)
    p.add_argument("--host", default="127.0.0.1")
    p.set_defaults(func=cmd_serve)

    return parser


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except TuneLmError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except FileNotFoundError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
