"""``alignkit`` command line.

Exit codes: 0 success, 1 usage error, 2 data error, 3 numeric failure.
"""
from __future__ import annotations

import argparse
import json
import logging
import os
import sys
from pathlib import Path

import numpy as np
import torch

from . import align_data as ad
from .decomp import decompose
from .errors import AlignkitError, ConfigError, DataError, NumericError
from .metrics import aligner_accuracy, corpus_bleu, repetition_ratio, token_accuracy
from .neural.config import ModelConfig, OptimConfig
from .neural.vocab import Vocabulary
from .pipeline import ABLATIONS, RescoreConfig, Trainer, TrainingConfig, Translator, prepare_examples
from .synth import SynthLanguageSpec, synth_generate

logger = logging.getLogger("alignkit")

CONFIG_ENV = "ALIGNKIT_CONFIG"

DEFAULT_CONFIG = {
    "model": {},
    "optimizer": {},
    "training": {},
    "rescore": {},
    "filter": {},
    "teacher": {
        "model": {"encoder_layers": 2, "decoder_layers": 2},
        "optimizer": {"peak_lr": 2e-3, "warmup_steps": 400},
        "steps": 8000,
    },
}


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(f"{self.prog}: error: {message}\n{self.format_usage()}")


def load_config(path=None) -> dict:
    """Merge a JSON config file over the defaults; sections are shallow-merged."""
    path = path or os.environ.get(CONFIG_ENV)
    config = json.loads(json.dumps(DEFAULT_CONFIG))
    if path:
        path = Path(path)
        if not path.exists():
            raise DataError(f"no such config file: {path}")
        try:
            user = json.loads(path.read_text())
        except json.JSONDecodeError as exc:
            raise ConfigError(f"{path}: {exc}") from exc
        unknown = set(user) - set(DEFAULT_CONFIG)
        if unknown:
            raise ConfigError(f"unknown config sections: {sorted(unknown)}")
        for key, value in user.items():
            config[key].update(value)
    return config


def _corpus_files(corpus_dir, prefix):
    base = Path(corpus_dir) / prefix
    files = {ext: base.with_name(f"{prefix}.{ext}") for ext in ("src", "tgt", "align", "score", "srcmap", "tgtmap")}
    if not files["src"].exists() or not files["tgt"].exists():
        raise DataError(f"corpus {base} needs {prefix}.src and {prefix}.tgt")
    return {k: (v if v.exists() else None) for k, v in files.items()}


def _read_prefix(corpus_dir, prefix, word_level=False, need_alignment=True):
    f = _corpus_files(corpus_dir, prefix)
    if need_alignment and f["align"] is None:
        raise DataError(f"corpus {corpus_dir}/{prefix} has no .align file")
    return ad.read_corpus(
        f["src"], f["tgt"], f["align"], f["score"], f["srcmap"], f["tgtmap"], word_level=word_level
    )


def _corpus_meta(corpus_dir):
    meta = Path(corpus_dir) / "preprocess.json"
    return json.loads(meta.read_text()) if meta.exists() else {"word_level": False}


# subcommands ------------------------------------------------------------------------------


def cmd_synth_data(args):
    spec = SynthLanguageSpec()
    if args.spec:
        spec = SynthLanguageSpec.from_dict(json.loads(Path(args.spec).read_text()))
    if args.merge_rate is not None:
        spec.merge_rate = args.merge_rate
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    for prefix, n, seed in (("train", args.train, args.seed), ("test", args.test, args.seed + 1)):
        corpus = [(pair, ad.to_matrix(pairs, pair.M, pair.N)) for pair, pairs in synth_generate(spec, n, seed)]
        ad.write_corpus(corpus, out, prefix)
    (out / "spec.json").write_text(json.dumps(spec.to_dict(), indent=2))
    return 0


def cmd_preprocess(args):
    config = load_config(args.config)
    filt = dict(config["filter"])
    if args.max_dup is not None:
        filt["max_duplication"] = args.max_dup
    if args.score_filter is not None:
        filt["score_filter_ratio"] = args.score_filter
    if args.null_fill is not None:
        filt["null_fill_strategy"] = args.null_fill
    cfg = ad.FilterConfig(**filt)
    word_level = args.word_level == "on"
    out = Path(args.out)
    report = {"word_level": word_level, "null_fill": cfg.null_fill_strategy.value, "prefixes": {}}
    for prefix in args.prefix:
        corpus = _read_prefix(args.corpus, prefix)
        ratio = cfg.score_filter_ratio
        if prefix != args.prefix[0]:
            # evaluation splits keep every sample that can be processed
            cfg_split = ad.FilterConfig(cfg.max_duplication, 0.0, cfg.null_fill_strategy)
        else:
            cfg_split = cfg
        if ratio > 0 and prefix == args.prefix[0] and any(p.alignment_score is None for p, _ in corpus):
            raise ConfigError(f"--score-filter {ratio} needs {prefix}.score; pass --score-filter 0 to disable")
        kept, stats = ad.preprocess(corpus, cfg_split, word_level=word_level, marker=args.marker)
        ad.write_corpus(kept, out, prefix)
        report["prefixes"][prefix] = {**vars(stats), "kept": stats.kept}
        logger.info("%s: kept %d of %d", prefix, stats.kept, stats.total)
    (out / "preprocess.json").write_text(json.dumps(report, indent=2))
    return 0


def cmd_decompose(args):
    lines = Path(args.alignments).read_text().splitlines() if Path(args.alignments).exists() else None
    if lines is None:
        raise DataError(f"no such file: {args.alignments}")
    if args.lengths:
        lengths = [tuple(int(x) for x in l.split()) for l in Path(args.lengths).read_text().splitlines()]
    else:
        src = Path(args.source).read_text().splitlines()
        tgt = Path(args.target).read_text().splitlines()
        lengths = [(len(s.split()), len(t.split())) for s, t in zip(src, tgt)]
    if len(lengths) != len(lines):
        raise DataError(f"{len(lines)} alignments for {len(lengths)} length entries")
    records = []
    for k, (line, (M, N)) in enumerate(zip(lines, lengths), start=1):
        d = decompose(ad.to_matrix(ad.parse_pharaoh(line, M, N, line=k), M, N))
        records.append(
            json.dumps({"c": d.c.tolist(), "r": d.r.tolist(), "permutation": d.perm.tolist(), "g": d.g.tolist()})
        )
    text = "".join(r + "\n" for r in records)
    if args.out:
        Path(args.out).parent.mkdir(parents=True, exist_ok=True)
        Path(args.out).write_text(text)
    else:
        sys.stdout.write(text)
    return 0


def cmd_train(args):
    config = load_config(args.config)
    meta = _corpus_meta(args.corpus)
    corpus = _read_prefix(args.corpus, args.prefix, word_level=meta["word_level"])
    vocab = Vocabulary.build([p.source_tokens + p.target_tokens for p, _ in corpus])
    extra = {"append_spurious": meta.get("null_fill") == "spurious", "word_level": meta["word_level"]}
    out = Path(args.out)
    if args.teacher:
        from .neural.teacher import save_teacher, train_teacher

        tcfg = config["teacher"]
        model_cfg = ModelConfig.from_dict({**config["model"], **tcfg.get("model", {})})
        model = train_teacher(
            [(p.source_tokens, p.target_tokens) for p, _ in corpus],
            vocab,
            model_cfg,
            OptimConfig.from_dict({**config["optimizer"], **tcfg.get("optimizer", {})}),
            steps=int(tcfg.get("steps", 8000)),
            batch_size=int(config["training"].get("batch_size", 32)),
            seed=int(config["training"].get("seed", 1)),
        )
        save_teacher(out, model, vocab, extra)
        return 0
    train_cfg = TrainingConfig.from_dict(config["training"])
    if args.steps is not None:
        train_cfg.steps = args.steps
    trainer = Trainer.create(
        ModelConfig.from_dict(config["model"]), vocab, OptimConfig.from_dict(config["optimizer"]), train_cfg
    )
    examples = prepare_examples(corpus, vocab)
    log_path = Path(args.log) if args.log else out.with_name(out.name + ".log.jsonl")
    log_path.parent.mkdir(parents=True, exist_ok=True)
    with open(log_path, "w") as log:
        trainer.fit(examples, log=log)
    trainer.save(out, extra)
    return 0


def _source_pairs(args, translator, append_spurious):
    src = Path(args.input)
    if not src.exists():
        raise DataError(f"no such file: {src}")
    lines = src.read_text().splitlines()
    maps = Path(args.input_map).read_text().splitlines() if getattr(args, "input_map", None) else None
    refs = Path(args.reference).read_text().splitlines() if getattr(args, "reference", None) else None
    pairs = []
    for k, line in enumerate(lines):
        tokens = line.split()
        word_map = [int(w) for w in maps[k].split()] if maps else None
        target = refs[k].split() if refs else ["<unk>"]
        pair = ad.SentencePair(tokens, target, word_map)
        if append_spurious and ad.SPURIOUS_TOKEN not in tokens:
            pair = ad.append_spurious_token(pair)
        pairs.append(pair)
    return pairs


def _write_outputs(args, results):
    text = "".join(" ".join(r.tokens) + "\n" for r in results)
    if args.output:
        Path(args.output).parent.mkdir(parents=True, exist_ok=True)
        Path(args.output).write_text(text)
    else:
        sys.stdout.write(text)
    if args.alignments_out:
        Path(args.alignments_out).write_text(
            "".join(ad.format_pharaoh(ad.to_pairs(r.alignment)) + "\n" for r in results)
        )


def cmd_translate(args):
    trainer = Trainer.load(args.ckpt)
    translator = Translator(trainer.model, trainer.vocab)
    extra = getattr(trainer, "extra", {})
    if trainer.model.cfg.architecture == "nat" and not args.reference:
        raise ConfigError("the aligner-free baseline decodes at reference length; pass --reference")
    pairs = _source_pairs(args, translator, extra.get("append_spurious", False))
    examples = prepare_examples([(p, None) for p in pairs], trainer.vocab)
    if args.rescore:
        if not args.teacher:
            raise ConfigError("--rescore needs --teacher")
        from .neural.teacher import TeacherScorer

        config = load_config(args.config)
        results = translator.rescore_examples(
            examples, RescoreConfig.from_dict(config["rescore"]), TeacherScorer.load(args.teacher)
        )
    else:
        results = translator.translate_examples(examples, ablate=args.ablate)
    _write_outputs(args, results)
    return 0


def cmd_oracle_translate(args):
    trainer = Trainer.load(args.ckpt)
    translator = Translator(trainer.model, trainer.vocab)
    extra = getattr(trainer, "extra", {})
    pairs = _source_pairs(args, translator, extra.get("append_spurious", False))
    lines = Path(args.alignments).read_text().splitlines()
    if len(lines) != len(pairs):
        raise DataError(f"{len(lines)} alignments for {len(pairs)} sentences")
    corpus = []
    for k, (pair, line) in enumerate(zip(pairs, lines), start=1):
        width = pair.num_source_words
        corpus.append((pair, ad.to_matrix(ad.parse_pharaoh(line, width, pair.N, line=k), width, pair.N)))
    results = translator.oracle_translate_examples(prepare_examples(corpus, trainer.vocab), ablate=args.ablate)
    _write_outputs(args, results)
    return 0


def cmd_score(args):
    hyps = [l.split() for l in Path(args.hyp).read_text().splitlines()] if Path(args.hyp).exists() else None
    refs = [l.split() for l in Path(args.ref).read_text().splitlines()] if Path(args.ref).exists() else None
    if hyps is None or refs is None:
        raise DataError("hypothesis and reference files must exist")
    report = {
        "bleu": corpus_bleu(hyps, refs, smooth=not args.no_smooth),
        "repeat_ratio": repetition_ratio(hyps).repeat_ratio,
        "token_acc": token_accuracy(hyps, refs),
    }
    if args.ckpt and args.corpus:
        trainer = Trainer.load(args.ckpt)
        meta = _corpus_meta(args.corpus)
        corpus = _read_prefix(args.corpus, args.prefix, word_level=meta["word_level"])
        acc = aligner_accuracy(trainer.model, prepare_examples(corpus, trainer.vocab))
        report.update(dup_acc=acc.dup_acc, perm_acc=acc.perm_acc, group_acc=acc.group_acc)
    text = json.dumps(report, indent=2)
    if args.out:
        Path(args.out).write_text(text + "\n")
    else:
        print(text)
    return 0


# parser -----------------------------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="alignkit", description=__doc__.splitlines()[0])
    parser.add_argument("--threads", type=int, default=1, help="torch intra-op threads (default 1)")
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", parser_class=_Parser)

    p = sub.add_parser("synth-data", help="generate a synthetic parallel corpus with gold alignments")
    p.add_argument("--out", required=True)
    p.add_argument("--train", type=int, default=5000)
    p.add_argument("--test", type=int, default=500)
    p.add_argument("--seed", type=int, default=1)
    p.add_argument("--spec", help="JSON language spec")
    p.add_argument("--merge-rate", type=float)
    p.set_defaults(func=cmd_synth_data)

    p = sub.add_parser("preprocess", help="word-level reduction, null filling and filtering")
    p.add_argument("--corpus", required=True, help="directory with <prefix>.src/.tgt/.align[/.score/.srcmap/.tgtmap]")
    p.add_argument("--out", required=True)
    p.add_argument("--prefix", nargs="+", default=["train"], help="first prefix is the training split")
    p.add_argument("--config")
    p.add_argument("--max-dup", type=int)
    p.add_argument("--score-filter", type=float)
    p.add_argument("--null-fill", choices=["copy", "spurious"])
    p.add_argument("--word-level", choices=["on", "off"], default="on")
    p.add_argument("--marker", default=ad.DEFAULT_CONTINUATION_MARKER, help="target continuation marker")
    p.set_defaults(func=cmd_preprocess)

    p = sub.add_parser("decompose", help="emit D/P/G factors of Pharaoh alignments as JSON lines")
    p.add_argument("--alignments", required=True)
    group = p.add_mutually_exclusive_group(required=True)
    group.add_argument("--lengths", help="file with 'M N' per line")
    group.add_argument("--source", help="source text (lengths from token counts; needs --target)")
    p.add_argument("--target")
    p.add_argument("--out")
    p.set_defaults(func=cmd_decompose)

    p = sub.add_parser("train", help="train a model on a preprocessed corpus")
    p.add_argument("--config")
    p.add_argument("--corpus", required=True)
    p.add_argument("--prefix", default="train")
    p.add_argument("--out", required=True, help="checkpoint path")
    p.add_argument("--steps", type=int)
    p.add_argument("--log", help="JSON-lines training log (default: <out>.log.jsonl)")
    p.add_argument("--teacher", action="store_true", help="train the autoregressive re-scoring teacher")
    p.set_defaults(func=cmd_train)

    for name, func, helptext in (
        ("translate", cmd_translate, "translate with predicted alignments"),
        ("oracle-translate", cmd_oracle_translate, "decode with given (gold) alignments"),
    ):
        p = sub.add_parser(name, help=helptext)
        p.add_argument("--ckpt", required=True)
        p.add_argument("--input", required=True)
        p.add_argument("--input-map", help="source subword-to-word map sidecar")
        p.add_argument("--output")
        p.add_argument("--alignments-out")
        p.add_argument("--ablate", choices=ABLATIONS, help="replace this factor with the identity")
        p.add_argument("--config")
        if name == "translate":
            p.add_argument("--rescore", action="store_true")
            p.add_argument("--teacher")
            p.add_argument("--reference", help="target file (lengths for the aligner-free baseline)")
        else:
            p.add_argument("--alignments", required=True, help="word-level Pharaoh file")
            p.add_argument("--reference", required=True, help="target file (gives target lengths)")
        p.set_defaults(func=func)

    p = sub.add_parser("score", help="BLEU, repetition ratio and optional aligner accuracy as JSON")
    p.add_argument("--hyp", required=True)
    p.add_argument("--ref", required=True)
    p.add_argument("--ckpt")
    p.add_argument("--corpus", help="preprocessed corpus with gold alignments for aligner accuracy")
    p.add_argument("--prefix", default="test")
    p.add_argument("--no-smooth", action="store_true")
    p.add_argument("--out")
    p.set_defaults(func=cmd_score)
    return parser


def run(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except UsageError as exc:
        sys.stderr.write(str(exc))
        return 1
    except SystemExit as exc:  # --help
        return int(exc.code or 0)
    if args.command is None:
        sys.stderr.write(parser.format_help())
        return 1
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.INFO, format="%(message)s")
    torch.set_num_threads(max(args.threads, 1))
    try:
        return args.func(args)
    except (NumericError,) as exc:
        sys.stderr.write(f"alignkit: numeric failure: {exc}\n")
        return 3
    except (DataError, ConfigError, OSError) as exc:
        sys.stderr.write(f"alignkit: {exc}\n")
        return 2


def main():
    sys.exit(run())


if __name__ == "__main__":
    main()
