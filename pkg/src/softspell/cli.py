"""Command-line surface: calibrate, train, correct, eval.

Every command takes explicit seeds (no OS entropy anywhere) and writes a
manifest next to each output recording the command, parameters, input file
digests, and tool version, so any output can be reproduced bit-for-bit.

Exit codes: 0 success, 1 runtime failure, 2 usage or validation error.
"""

from __future__ import annotations

import argparse
import hashlib
import json
import sys

import numpy as np

from . import __version__, alphabet
from .channel import CalibrationFailedError, Softmax, calibrate, load_model, save_model
from .evaluation import config_from_key, run_ablation
from .lexicon import Lexicon, LexiconError
from .pipeline import PipelineOptions, argmax_word, correct, simulate_word
from .spellnet import (
    SpellNetConfig,
    TrainConfig,
    build,
    generate_dataset,
    load_checkpoint,
    save_checkpoint,
    train,
)
from .statistical import NorvigCorrector


class UsageError(Exception):
    """Invalid flag combination or input validation failure (exit 2)."""


def _digest(path: str) -> str:
    hasher = hashlib.sha256()
    with open(path, "rb") as handle:
        for chunk in iter(lambda: handle.read(65536), b""):
            hasher.update(chunk)
    return hasher.hexdigest()


def write_manifest(out_path: str, command: str, parameters: dict, input_files: dict) -> None:
    manifest = {
        "tool": "softspell",
        "version": __version__,
        "command": command,
        "parameters": parameters,
        "input_digests": {name: _digest(path) for name, path in input_files.items() if path},
    }
    with open(str(out_path) + ".manifest.json", "w", encoding="utf-8") as handle:
        json.dump(manifest, handle, indent=2, sort_keys=True)
        handle.write("\n")


def _load_lexicon(args) -> Lexicon:
    return Lexicon.load(args.lexicon, args.freq)


def cmd_calibrate(args) -> int:
    if not 0.0 < args.top1 < args.top5 <= 1.0:
        raise UsageError("targets must satisfy 0 < top1 < top5 <= 1")
    result = calibrate(
        target_top1=args.top1,
        target_top5=args.top5,
        n_mc=args.samples,
        rng=np.random.default_rng(args.seed),
    )
    save_model(result.model, args.out)
    write_manifest(
        args.out,
        "calibrate",
        {"top1": args.top1, "top5": args.top5, "samples": args.samples, "seed": args.seed},
        {},
    )
    print(f"achieved top-1 {result.top1:.4f}, top-5 {result.top5:.4f}")
    print(f"model written to {args.out}")
    return 0


_VARIANT_KEYS = ("hh", "ss", "hs", "mix", "alpha", "noise")


def cmd_train(args) -> int:
    lexicon = _load_lexicon(args)
    model = load_model(args.model)
    config = config_from_key(args.variant)
    rng = np.random.default_rng(args.seed)
    dataset = generate_dataset(lexicon, model, config.train_variant, args.pairs, rng)
    net = build(SpellNetConfig(), np.random.default_rng(args.seed))
    history = train(
        net,
        dataset,
        TrainConfig(
            epochs=args.epochs,
            batch_size=args.batch,
            learning_rate=args.lr,
            seed=args.seed,
        ),
    )
    save_checkpoint(net, args.out)
    history_path = str(args.out) + ".history.csv"
    with open(history_path, "w", encoding="utf-8") as handle:
        handle.write("epoch,loss,char_accuracy\n")
        for stats in history:
            handle.write(f"{stats.epoch},{stats.loss!r},{stats.char_accuracy!r}\n")
    write_manifest(
        args.out,
        "train",
        {
            "variant": args.variant,
            "pairs": args.pairs,
            "epochs": args.epochs,
            "batch": args.batch,
            "lr": args.lr,
            "seed": args.seed,
        },
        {"lexicon": args.lexicon, "freq": args.freq, "model": args.model},
    )
    final = history[-1].char_accuracy if history else float("nan")
    print(f"checkpoint written to {args.out} (final training char accuracy {final:.4f})")
    return 0


def cmd_correct(args) -> int:
    if (args.word is None) == (not args.stdin):
        raise UsageError("provide exactly one of --word or --stdin")
    lexicon = _load_lexicon(args)
    model = load_model(args.model)
    net = load_checkpoint(args.ckpt) if args.ckpt else None
    options = PipelineOptions(
        use_dictionary=True,
        use_net=net is not None,
        use_norvig=args.norvig,
        test_representation=args.test_representation,
    )
    corrector = NorvigCorrector(lexicon) if args.norvig else None
    words = [args.word] if args.word is not None else [line.strip() for line in sys.stdin]
    rng = np.random.default_rng(args.seed)
    for word in words:
        if not word:
            continue
        word = word.upper()
        try:
            alphabet.tokenize(word)
        except alphabet.AlphabetError as exc:
            raise UsageError(f"cannot spell {word!r}: {exc}") from exc
        sample = simulate_word(word, model, Softmax(), int(rng.integers(2**63)))
        result = correct(sample, lexicon, net, options, corrector)
        print(f"{word}\t{argmax_word(sample)}\t{result.word}\t{result.provenance}")
    return 0


def cmd_eval(args) -> int:
    lexicon = _load_lexicon(args)
    model = load_model(args.model)
    try:
        configs = [config_from_key(key) for key in args.configs.split(",") if key.strip()]
    except ValueError as exc:
        raise UsageError(str(exc)) from exc
    if not configs:
        raise UsageError("no configurations given")
    seeds = [int(s) for s in args.seeds.split(",")] if args.seeds else [args.seed]
    report = run_ablation(
        lexicon,
        model,
        configs,
        n_eval_words=args.words,
        seeds=seeds,
        n_pairs=args.pairs,
        epochs=args.epochs,
        batch_size=args.batch,
        learning_rate=args.lr,
        n_jobs=args.jobs,
    )
    with open(args.out, "w", encoding="utf-8") as handle:
        handle.write(report.to_csv())
    table_path = str(args.out) + ".table.txt"
    with open(table_path, "w", encoding="utf-8") as handle:
        handle.write(report.to_table())
    write_manifest(
        args.out,
        "eval",
        {
            "configs": args.configs,
            "words": args.words,
            "seed": args.seed,
            "seeds": args.seeds,
            "pairs": args.pairs,
            "epochs": args.epochs,
            "batch": args.batch,
            "lr": args.lr,
        },
        {"lexicon": args.lexicon, "freq": args.freq, "model": args.model},
    )
    print(report.to_table(), end="")
    print(f"report written to {args.out}")
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="softspell",
        description="Spell-correction over per-character probability distributions.",
    )
    parser.add_argument("--version", action="version", version=f"softspell {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    cal = sub.add_parser("calibrate", help="calibrate the synthetic channel to a target accuracy")
    cal.add_argument("--top1", type=float, default=0.75)
    cal.add_argument("--top5", type=float, default=0.98)
    cal.add_argument("--samples", type=int, default=100_000)
    cal.add_argument("--seed", type=int, default=0)
    cal.add_argument("--out", required=True)
    cal.set_defaults(func=cmd_calibrate)

    tr = sub.add_parser("train", help="generate a dataset and train the correction network")
    tr.add_argument("--lexicon", required=True)
    tr.add_argument("--freq", default=None)
    tr.add_argument("--model", required=True)
    tr.add_argument("--variant", choices=_VARIANT_KEYS, required=True)
    tr.add_argument("--pairs", type=int, default=9830)
    tr.add_argument("--epochs", type=int, required=True)
    tr.add_argument("--batch", type=int, default=1024)
    tr.add_argument("--lr", type=float, default=0.001)
    tr.add_argument("--seed", type=int, default=0)
    tr.add_argument("--out", required=True)
    tr.set_defaults(func=cmd_train)

    co = sub.add_parser("correct", help="simulate spelling a word and correct it")
    co.add_argument("--lexicon", required=True)
    co.add_argument("--freq", default=None)
    co.add_argument("--model", required=True)
    co.add_argument("--ckpt", default=None)
    co.add_argument("--norvig", action="store_true")
    co.add_argument("--word", default=None)
    co.add_argument("--stdin", action="store_true")
    co.add_argument("--test-representation", choices=("softmax", "hardmax"), default="softmax")
    co.add_argument("--seed", type=int, default=0)
    co.set_defaults(func=cmd_correct)

    ev = sub.add_parser("eval", help="run the ablation harness and write a report")
    ev.add_argument("--lexicon", required=True)
    ev.add_argument("--freq", default=None)
    ev.add_argument("--model", required=True)
    ev.add_argument("--configs", required=True, help="comma list: hh,ss,hs,mix,alpha,noise,n; add +n for Norvig")
    ev.add_argument("--words", type=int, default=100)
    ev.add_argument("--seed", type=int, default=0)
    ev.add_argument("--seeds", default=None, help="comma list of seeds (overrides --seed)")
    ev.add_argument("--pairs", type=int, default=9830)
    ev.add_argument("--epochs", type=int, default=100)
    ev.add_argument("--batch", type=int, default=1024)
    ev.add_argument("--lr", type=float, default=0.001)
    ev.add_argument("--jobs", type=int, default=1)
    ev.add_argument("--out", required=True)
    ev.set_defaults(func=cmd_eval)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    try:
        return args.func(args)
    except UsageError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except (LexiconError, CalibrationFailedError, OSError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
