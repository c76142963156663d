"""Command-line entry point: ``nmtdebias <subcommand> [--config FILE] [--key value ...]``.

Every option may also come from a flat ``key=value`` config file; flags win
over the file. Exit codes: 0 success, 2 configuration error, 3 stage failure.
"""
from __future__ import annotations

import argparse
import dataclasses
import json
import logging
import sys
from pathlib import Path

from .corpus import CoocMatrix, ParallelCorpus, Vocabulary, build_vocab, count_cooccurrences, read_sentences
from .debias import hard_debias
from .embeddings import EmbeddingSet
from .evaluation import (
    OccupationsTestSuite,
    analyze_gender,
    bleu,
    bundled_occupations,
    generate_occupations_test,
    read_occupations,
)
from .exceptions import StageError
from .glove import GloVe, GNGloVe
from .lexicon import GenderLexicon, bundled_lexicon
from .pipeline import ConfigError, ExperimentConfig, _bool, progress, read_config_file, run_pipeline

logger = logging.getLogger("nmtdebias")

REQ = object()  # marks a required option

# option name -> (converter, default); a "path" converter also checks the file exists
GLOVE_OPTS = {
    "cooc": ("path", REQ), "vocab": ("path", REQ), "output": (str, REQ), "loss_trace": (str, ""),
    "dim": (int, 64), "x_max": (float, 10.0), "alpha": (float, 0.75), "max_iter": (int, 15),
    "learning_rate": (float, 0.05), "seed": (int, 0), "batch_size": (int, 32), "n_jobs": (int, 1),
}
MODEL_OPTS = {
    "d_model": (int, 64), "heads": (int, 4), "layers": (int, 2), "ff_dim": (int, 256),
    "dropout": (float, 0.1), "max_len": (int, 64), "label_smoothing": (float, 0.1), "seed": (int, 0),
    "steps": (int, 2000), "batch_size": (int, 32), "lr_factor": (float, 2.0), "warmup": (int, 400),
    "min_count": (int, 1),
}
COMMANDS = {
    "vocab": {"input": ("path", REQ), "output": (str, REQ), "min_count": (int, 5), "lowercase": (bool, False)},
    "cooccur": {"input": ("path", REQ), "vocab": ("path", REQ), "output": (str, REQ), "window": (int, 15),
                "distance_weighting": (bool, True), "lowercase": (bool, False)},
    "glove-train": GLOVE_OPTS,
    "gn-glove-train": {**GLOVE_OPTS, "lexicon": (str, "en"), "lowercase": (bool, False),
                       "lambda_d": (float, 1.0), "lambda_e": (float, 1.0), "beta": (float, 1.0)},
    "debias": {"embeddings": ("path", REQ), "output": (str, REQ), "lexicon": (str, "en"),
               "report": (str, ""), "lowercase": (bool, False)},
    "nmt-train": {"train_src": ("path", REQ), "train_tgt": ("path", REQ), "output": (str, REQ),
                  "side": (str, "none"), "freeze": (bool, False), "src_embeddings": (str, ""),
                  "tgt_embeddings": (str, ""), "lowercase": (bool, False), "loss_trace": (str, ""),
                  "checkpoint_every": (int, 0), "checkpoint_dir": (str, ""), **MODEL_OPTS},
    "translate": {"checkpoint": ("path", REQ), "input": ("path", REQ), "output": (str, ""),
                  "beam": (int, 1), "lowercase": (bool, False)},
    "bleu": {"hyp": ("path", REQ), "ref": ("path", REQ), "max_n": (int, 4), "output": (str, "")},
    "occtest-gen": {"occupations": (str, ""), "output": (str, REQ), "female_name": (str, "Mary"),
                    "male_name": (str, "John"), "source_out": (str, ""), "reference_out": (str, "")},
    "occtest-eval": {"suite": ("path", REQ), "hyp": ("path", REQ), "output": (str, ""), "model": (str, "model"),
                     "female_name": (str, "Mary"), "male_name": (str, "John")},
    "toy-data": {"output": (str, REQ), "n_sentences": (int, 2000), "seed": (int, 0)},
    "run": None,  # keys come from ExperimentConfig
}


def _run_keys():
    return {f.name: f for f in dataclasses.fields(ExperimentConfig)}


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="nmtdebias", description=__doc__.splitlines()[0])
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)
    for name, opts in COMMANDS.items():
        p = sub.add_parser(name)
        p.add_argument("--config", help="flat key=value file")
        keys = _run_keys() if opts is None else opts
        for key in keys:
            flags = dict.fromkeys([f"--{key}", f"--{key.replace('_', '-')}"])
            p.add_argument(*flags, dest=key, nargs="?", const="true", default=None)
    return parser


def resolve(command: str, flags: dict) -> dict:
    """Merge config file and flags, convert types, check required keys."""
    raw = {}
    if flags.get("config"):
        if not Path(flags["config"]).is_file():
            raise ConfigError(f"config file not found: {flags['config']}")
        raw.update(read_config_file(flags["config"]))
    raw.update({k: v for k, v in flags.items() if v is not None and k != "config"})
    if COMMANDS[command] is None:
        return raw
    opts = COMMANDS[command]
    unknown = set(raw) - set(opts)
    if unknown:
        raise ConfigError(f"unknown option(s) for {command}: {sorted(unknown)}")
    out = {}
    for key, (conv, default) in opts.items():
        if key not in raw:
            if default is REQ:
                raise ConfigError(f"{command}: missing required option --{key}")
            out[key] = default
            continue
        val = raw[key]
        try:
            if conv == "path":
                if not Path(val).exists():
                    raise ConfigError(f"{key}: no such file {val}")
                out[key] = val
            elif conv is bool:
                out[key] = _bool(val)
            else:
                out[key] = conv(val)
        except ValueError as e:
            if isinstance(e, ConfigError):
                raise
            raise ConfigError(f"bad value for {key}: {val!r}") from e
    return out


def _lexicon(spec, lowercase):
    if spec in ("en", "es"):
        lex = bundled_lexicon(spec)
    elif Path(spec).is_dir():
        lex = GenderLexicon.from_dir(spec)
    else:
        raise ConfigError(f"lexicon: not a bundled language or a directory: {spec}")
    return lex.lowercased() if lowercase else lex


def _write_trace(path, trace):
    if path:
        with open(path, "w") as fh:
            fh.writelines(f"{k}\t{v:.6f}\n" for k, v in enumerate(trace, 1))


def _emit(path, text):
    if path:
        Path(path).write_text(text, encoding="utf-8")
    else:
        sys.stdout.write(text)


def cmd_vocab(o):
    build_vocab(read_sentences(o["input"], o["lowercase"]), o["min_count"]).save(o["output"])


def cmd_cooccur(o):
    vocab = Vocabulary.load(o["vocab"])
    sents = read_sentences(o["input"], o["lowercase"])
    count_cooccurrences(sents, vocab, o["window"], o["distance_weighting"]).save(o["output"])


def _glove_params(o):
    return {k: o[k] for k in ("dim", "x_max", "alpha", "max_iter", "learning_rate", "seed", "batch_size", "n_jobs")}


def cmd_glove_train(o):
    est = GloVe(**_glove_params(o)).fit(CoocMatrix.load(o["cooc"]), vocab=Vocabulary.load(o["vocab"]))
    est.embeddings_.save(o["output"])
    _write_trace(o["loss_trace"], est.loss_trace_)


def cmd_gn_glove_train(o):
    lex = _lexicon(o["lexicon"], o["lowercase"])
    est = GNGloVe(lexicon=lex, lambda_d=o["lambda_d"], lambda_e=o["lambda_e"], beta=o["beta"], **_glove_params(o))
    est.fit(CoocMatrix.load(o["cooc"]), vocab=Vocabulary.load(o["vocab"]))
    est.embeddings_.save(o["output"])
    _write_trace(o["loss_trace"], est.loss_trace_)


def cmd_debias(o):
    out, g, report = hard_debias(EmbeddingSet.load(o["embeddings"]), _lexicon(o["lexicon"], o["lowercase"]))
    out.save(o["output"])
    if o["report"]:
        Path(o["report"]).write_text(report.to_tsv(), encoding="utf-8")
    logger.info("skipped %d items; %d neutral words missing", len(report.skipped), report.missing_neutral)


def cmd_nmt_train(o):
    from .nmt import InjectionSpec, TrainingConfig, Transformer, TransformerConfig, inject_embeddings, train
    from .nmt.training import SIDES, save_checkpoint

    if o["side"] not in SIDES:
        raise ConfigError(f"side must be one of {SIDES}")
    src_emb = EmbeddingSet.load(o["src_embeddings"]) if o["src_embeddings"] else None
    tgt_emb = EmbeddingSet.load(o["tgt_embeddings"]) if o["tgt_embeddings"] else None
    try:
        spec = InjectionSpec(o["side"], o["freeze"], src_emb, tgt_emb)
        cfg = TransformerConfig(*(o[k] for k in ("d_model", "heads", "layers", "ff_dim", "dropout", "max_len",
                                                  "label_smoothing", "seed")))
    except ValueError as e:
        raise ConfigError(str(e)) from e
    corpus = ParallelCorpus.read(o["train_src"], o["train_tgt"], o["lowercase"])
    src_vocab, tgt_vocab = build_vocab(corpus.source, o["min_count"]), build_vocab(corpus.target, o["min_count"])
    model = Transformer(cfg, len(src_vocab), len(tgt_vocab))
    inject_embeddings(model, spec, src_vocab, tgt_vocab)
    trace = train(model, corpus, src_vocab, tgt_vocab,
                  TrainingConfig(o["steps"], o["batch_size"], o["lr_factor"], o["warmup"],
                                 o["checkpoint_every"], o["checkpoint_dir"] or None))
    save_checkpoint(model, o["output"], src_vocab, tgt_vocab)
    _write_trace(o["loss_trace"], trace)


def cmd_translate(o):
    from .nmt.decoding import translate
    from .nmt.training import load_checkpoint

    model, sv, tv = load_checkpoint(o["checkpoint"])
    lines = [" ".join(translate(model, s, sv, tv, o["beam"])) + "\n"
             for s in _read_lines_tokens(o["input"], o["lowercase"])]
    _emit(o["output"], "".join(lines))


def _read_lines_tokens(path, lowercase):
    # keep empty lines so output stays line-aligned with input
    from .corpus import tokenize

    with open(path, encoding="utf-8") as fh:
        return [tokenize(line, lowercase) for line in fh.read().splitlines()]


def cmd_bleu(o):
    hyp = Path(o["hyp"]).read_text(encoding="utf-8").splitlines()
    ref = Path(o["ref"]).read_text(encoding="utf-8").splitlines()
    try:
        report = bleu(hyp, ref, o["max_n"])
    except ValueError as e:
        raise ConfigError(str(e)) from e
    _emit(o["output"], report.to_json() + "\n")


def cmd_occtest_gen(o):
    occs = read_occupations(o["occupations"]) if o["occupations"] else bundled_occupations()
    suite = generate_occupations_test(occs, o["female_name"], o["male_name"])
    suite.save(o["output"])
    if o["source_out"]:
        Path(o["source_out"]).write_text("".join(s + "\n" for s in suite.sources), encoding="utf-8")
    if o["reference_out"]:
        Path(o["reference_out"]).write_text("".join(s + "\n" for s in suite.references), encoding="utf-8")


def cmd_occtest_eval(o):
    suite = OccupationsTestSuite.load(o["suite"])
    hyp = Path(o["hyp"]).read_text(encoding="utf-8").splitlines()
    try:
        report = analyze_gender(hyp, suite, o["female_name"], o["male_name"])
    except ValueError as e:
        raise ConfigError(str(e)) from e
    if o["output"]:
        Path(o["output"] + ".tsv").write_text(report.to_tsv(o["model"]), encoding="utf-8")
        Path(o["output"] + ".json").write_text(report.to_json() + "\n", encoding="utf-8")
    else:
        sys.stdout.write(report.to_tsv(o["model"]))


def cmd_toy_data(o):
    """Write a small gendered parallel corpus plus a matching ``run`` config."""
    from .synthetic import occupation_parallel_corpus

    out = Path(o["output"])
    out.mkdir(parents=True, exist_ok=True)
    occs = bundled_occupations()
    src, tgt = occupation_parallel_corpus(occs, female_names=("Mary", "Lucy"), male_names=("John", "Peter"),
                                          seed=o["seed"])
    src, tgt = src[:o["n_sentences"]], tgt[:o["n_sentences"]]
    (out / "train.en").write_text("".join(" ".join(s) + "\n" for s in src), encoding="utf-8")
    (out / "train.es").write_text("".join(" ".join(t) + "\n" for t in tgt), encoding="utf-8")
    # the bundled word sets barely overlap this tiny corpus, so ship matching ones
    names = ["mary,john", "lucy,peter"]
    lexicons = {"en": (["her,him"] + names, []), "es": (["la,lo", "amiga,amigo"] + names, ["amiga,amigo"])}
    for lang, (pairs, equalize) in lexicons.items():
        d = out / f"lexicon_{lang}"
        d.mkdir(exist_ok=True)
        (d / "definitional_pairs.txt").write_text("".join(p + "\n" for p in pairs), encoding="utf-8")
        (d / "equalize_pairs.txt").write_text("".join(p + "\n" for p in equalize), encoding="utf-8")
        words = sorted({w for p in pairs + equalize for w in p.split(",")})
        (d / "gender_specific.txt").write_text("".join(w + "\n" for w in words), encoding="utf-8")
    (out / "experiment.cfg").write_text(
        f"train_src = {out / 'train.en'}\ntrain_tgt = {out / 'train.es'}\n"
        f"lexicon_src = {out / 'lexicon_en'}\nlexicon_tgt = {out / 'lexicon_es'}\n"
        f"variant = none,glove,glove-hard-debiased,gn-glove\nside = encoder,decoder,both\n"
        f"output = {out / 'experiment'}\nsteps = 300\nmin_count = 2\n",
        encoding="utf-8",
    )


def cmd_run(o):
    cfg = ExperimentConfig.from_mapping(o).validate()
    root = run_pipeline(cfg)
    sys.stdout.write((root / "summary.tsv").read_text(encoding="utf-8"))


HANDLERS = {
    "vocab": cmd_vocab, "cooccur": cmd_cooccur, "glove-train": cmd_glove_train,
    "gn-glove-train": cmd_gn_glove_train, "debias": cmd_debias, "nmt-train": cmd_nmt_train,
    "translate": cmd_translate, "bleu": cmd_bleu, "occtest-gen": cmd_occtest_gen,
    "occtest-eval": cmd_occtest_eval, "toy-data": cmd_toy_data, "run": cmd_run,
}


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as e:
        return int(e.code or 0)
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.INFO, stream=sys.stderr,
                        format="%(levelname)s %(name)s: %(message)s")
    flags = {k: v for k, v in vars(args).items() if k not in ("command", "verbose")}
    try:
        opts = resolve(args.command, flags)
    except ConfigError as e:
        logger.error("config error: %s", e)
        return 2
    staged = args.command != "run"
    try:
        if staged:
            progress(args.command, "start")
        HANDLERS[args.command](opts)
        if staged:
            progress(args.command, "done")
    except ConfigError as e:
        logger.error("config error: %s", e)
        return 2
    except StageError as e:
        logger.error("%s", e)
        return 3
    except Exception as e:  # noqa: BLE001 - any failure inside a stage maps to exit code 3
        logger.error("stage %s failed: %s: %s", args.command, type(e).__name__, e)
        return 3
    return 0


if __name__ == "__main__":
    sys.exit(main())
