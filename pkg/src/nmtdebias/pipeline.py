"""Experiment matrix runner with content-hash stage caching."""
from __future__ import annotations

import dataclasses
import hashlib
import json
import logging
import shutil
import sys
from dataclasses import dataclass, field, fields
from pathlib import Path

from . import __version__
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
from .nmt import InjectionSpec, TrainingConfig, Transformer, TransformerConfig, inject_embeddings, train
from .nmt.decoding import translate
from .nmt.training import load_checkpoint, save_checkpoint

logger = logging.getLogger(__name__)

VARIANTS = ("none", "glove", "glove-hard-debiased", "gn-glove")
SIDES = ("none", "encoder", "decoder", "both")


class ConfigError(ValueError):
    pass


def _bool(v) -> bool:
    if isinstance(v, bool):
        return v
    s = str(v).strip().lower()
    if s in ("1", "true", "yes", "on"):
        return True
    if s in ("0", "false", "no", "off", ""):
        return False
    raise ConfigError(f"not a boolean: {v!r}")


def _list(v) -> list[str]:
    if isinstance(v, (list, tuple)):
        return list(v)
    return [p.strip() for p in str(v).split(",") if p.strip()]


@dataclass
class ExperimentConfig:
    """All knobs of one experiment matrix.

    ``variant`` and ``side`` accept comma-separated lists; the matrix is
    every (variant, side) combination, where variant ``none`` runs once
    with side ``none``.
    """

    train_src: str = ""
    train_tgt: str = ""
    test_src: str = ""
    test_ref: str = ""
    embed_src: str = ""
    embed_tgt: str = ""
    occupations: str = ""
    lexicon_src: str = "en"
    lexicon_tgt: str = "es"
    variant: list = field(default_factory=lambda: ["none"])
    side: list = field(default_factory=lambda: ["none"])
    freeze: bool = False
    output: str = "experiment"
    seed: int = 0
    lowercase: bool = True
    female_name: str = "Mary"
    male_name: str = "John"
    # embeddings
    min_count: int = 5
    window: int = 15
    x_max: float = 10.0
    alpha: float = 0.75
    glove_iter: int = 15
    glove_lr: float = 0.05
    glove_batch: int = 32
    lambda_d: float = 1.0
    lambda_e: float = 1.0
    beta: float = 1.0
    # translator
    d_model: int = 64
    heads: int = 4
    layers: int = 2
    ff_dim: int = 256
    dropout: float = 0.1
    max_len: int = 64
    label_smoothing: float = 0.1
    steps: int = 2000
    batch_size: int = 32
    warmup: int = 400
    lr_factor: float = 2.0
    beam: int = 1
    nmt_min_count: int = 1

    @classmethod
    def from_mapping(cls, values: dict) -> "ExperimentConfig":
        known = {f.name: f for f in fields(cls)}
        kwargs = {}
        for key, raw in values.items():
            key = key.replace("-", "_")
            if key not in known:
                raise ConfigError(f"unknown config key {key!r}")
            default = known[key].default
            if default is dataclasses.MISSING:
                default = known[key].default_factory()
            try:
                if isinstance(default, bool):
                    kwargs[key] = _bool(raw)
                elif isinstance(default, int):
                    kwargs[key] = int(raw)
                elif isinstance(default, float):
                    kwargs[key] = float(raw)
                elif isinstance(default, list):
                    kwargs[key] = _list(raw)
                else:
                    kwargs[key] = str(raw)
            except ValueError as e:
                raise ConfigError(f"bad value for {key}: {raw!r}") from e
        return cls(**kwargs)

    def validate(self) -> "ExperimentConfig":
        if not self.train_src or not self.train_tgt:
            raise ConfigError("train_src and train_tgt are required")
        for key in ("train_src", "train_tgt", "test_src", "test_ref", "embed_src", "embed_tgt", "occupations"):
            path = getattr(self, key)
            if path and not Path(path).is_file():
                raise ConfigError(f"{key}: no such file {path}")
        if bool(self.test_src) != bool(self.test_ref):
            raise ConfigError("test_src and test_ref must be given together")
        for key in ("lexicon_src", "lexicon_tgt"):
            val = getattr(self, key)
            if val not in ("en", "es") and not Path(val).is_dir():
                raise ConfigError(f"{key}: not a bundled language or a directory: {val}")
        for v in self.variant:
            if v not in VARIANTS:
                raise ConfigError(f"unknown variant {v!r}; choose from {VARIANTS}")
        for s in self.side:
            if s not in SIDES:
                raise ConfigError(f"unknown side {s!r}; choose from {SIDES}")
        try:
            TransformerConfig(self.d_model, self.heads, self.layers, self.ff_dim, self.dropout,
                              self.max_len, self.label_smoothing, self.seed)
        except ValueError as e:
            raise ConfigError(str(e)) from e
        if not self.cells():
            raise ConfigError("the configured matrix has no cells")
        return self

    def cells(self) -> list[tuple[str, str]]:
        out = []
        for v in self.variant:
            if v == "none":
                out.append(("none", "none"))
                continue
            out.extend((v, s) for s in self.side if s != "none")
        return list(dict.fromkeys(out))


def read_config_file(path) -> dict:
    """Parse a flat ``key = value`` file; ``#`` starts a comment line."""
    values = {}
    with open(path, encoding="utf-8") as fh:
        for n, line in enumerate(fh, 1):
            line = line.strip()
            if not line or line.startswith("#"):
                continue
            if "=" not in line:
                raise ConfigError(f"{path}:{n}: expected key=value")
            key, _, val = line.partition("=")
            values[key.strip()] = val.strip()
    return values


def sha256_file(path) -> str:
    h = hashlib.sha256()
    with open(path, "rb") as fh:
        for chunk in iter(lambda: fh.read(1 << 20), b""):
            h.update(chunk)
    return h.hexdigest()


def sha256_obj(obj) -> str:
    return hashlib.sha256(json.dumps(obj, sort_keys=True, default=str).encode()).hexdigest()


def progress(name: str, state: str):
    print(f"STAGE {name} {state}", file=sys.stderr, flush=True)


class StageCache:
    """Stage outputs stored under ``root/<stage>/<key>/``.

    A stage is reused when its key (a hash over input content hashes and
    parameters) already has a completed directory.
    """

    def __init__(self, root):
        self.root = Path(root)
        self.records = []

    def run(self, stage: str, label: str, inputs: dict, produce) -> tuple[Path, str]:
        key = sha256_obj({"stage": stage, "inputs": inputs})
        out = self.root / stage / key[:16]
        name = f"{stage}:{label}" if label else stage
        marker = out / ".done"
        state = None
        if marker.is_file():
            recorded = json.loads(marker.read_text())
            if recorded.get("key") == key and recorded.get("output_hash") == _dir_hash(out):
                state = "cached"
            else:
                logger.warning("stale cache for %s (hash mismatch); recomputing", name)
        if state == "cached":
            progress(name, "cached")
        else:
            progress(name, "start")
            if out.exists():
                shutil.rmtree(out)
            tmp = out.with_name(out.name + ".tmp")
            if tmp.exists():
                shutil.rmtree(tmp)
            tmp.mkdir(parents=True)
            try:
                produce(tmp)
            except Exception as e:
                shutil.rmtree(tmp, ignore_errors=True)
                raise StageError(name, e) from e
            (tmp / ".done").write_text(json.dumps({"key": key, "output_hash": _dir_hash(tmp)}))
            tmp.rename(out)
            progress(name, "done")
            state = "done"
        digest = _dir_hash(out)
        self.records.append({"stage": name, "key": key, "state": state, "output_hash": digest})
        return out, digest


def _dir_hash(path: Path) -> str:
    return sha256_obj({p.name: sha256_file(p) for p in sorted(path.iterdir()) if p.name != ".done"})


def _lexicon(spec: str, lowercase: bool) -> GenderLexicon:
    lex = bundled_lexicon(spec) if spec in ("en", "es") else GenderLexicon.from_dir(spec)
    return lex.lowercased() if lowercase else lex


def _write_lines(path, sentences):
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        for s in sentences:
            fh.write(" ".join(s) + "\n")


def run_pipeline(config: ExperimentConfig) -> Path:
    """Run every matrix cell; returns the experiment directory.

    Writes ``summary.tsv`` (one row per cell) and ``manifest.json`` at the
    top level and per-cell reports under ``cells/``.
    """
    config.validate()
    root = Path(config.output)
    root.mkdir(parents=True, exist_ok=True)
    cache = StageCache(root / "cache")
    cfg = config

    corpus_hash = {"src": sha256_file(cfg.train_src), "tgt": sha256_file(cfg.train_tgt)}
    embed_paths = {"src": [cfg.train_src] + ([cfg.embed_src] if cfg.embed_src else []),
                   "tgt": [cfg.train_tgt] + ([cfg.embed_tgt] if cfg.embed_tgt else [])}
    lexicons = {"src": _lexicon(cfg.lexicon_src, cfg.lowercase), "tgt": _lexicon(cfg.lexicon_tgt, cfg.lowercase)}
    lex_hash = {k: sha256_obj(dataclasses.asdict(v)) for k, v in lexicons.items()}

    def embeddings_for(lang: str, variant: str):
        texts = [sha256_file(p) for p in embed_paths[lang]]

        def make_vocab(d):
            sents = [s for p in embed_paths[lang] for s in read_sentences(p, cfg.lowercase)]
            build_vocab(sents, cfg.min_count).save(d / "vocab.txt")

        vdir, vhash = cache.run("vocab", lang, {"texts": texts, "min_count": cfg.min_count,
                                                "lowercase": cfg.lowercase}, make_vocab)

        def make_cooc(d):
            sents = [s for p in embed_paths[lang] for s in read_sentences(p, cfg.lowercase)]
            count_cooccurrences(sents, Vocabulary.load(vdir / "vocab.txt"), cfg.window).save(d / "cooc.bin")

        cdir, chash = cache.run("cooccur", lang, {"vocab": vhash, "texts": texts, "window": cfg.window},
                                make_cooc)
        glove_params = dict(dim=cfg.d_model, x_max=cfg.x_max, alpha=cfg.alpha, max_iter=cfg.glove_iter,
                            learning_rate=cfg.glove_lr, seed=cfg.seed, batch_size=cfg.glove_batch)

        def fit(est, d):
            vocab = Vocabulary.load(vdir / "vocab.txt")
            est.fit(CoocMatrix.load(cdir / "cooc.bin"), vocab=vocab)
            est.embeddings_.save(d / "vectors.txt")
            with open(d / "loss.tsv", "w") as fh:
                fh.writelines(f"{k}\t{v:.6f}\n" for k, v in enumerate(est.loss_trace_, 1))

        if variant == "gn-glove":
            gn = dict(lambda_d=cfg.lambda_d, lambda_e=cfg.lambda_e, beta=cfg.beta)
            edir, ehash = cache.run("gn-glove-train", lang,
                                    {"cooc": chash, "vocab": vhash, "lexicon": lex_hash[lang], **glove_params, **gn},
                                    lambda d: fit(GNGloVe(lexicon=lexicons[lang], **gn, **glove_params), d))
            return EmbeddingSet.load(edir / "vectors.txt", cfg.d_model - 1), ehash
        edir, ehash = cache.run("glove-train", lang, {"cooc": chash, "vocab": vhash, **glove_params},
                                lambda d: fit(GloVe(**glove_params), d))
        if variant == "glove":
            return EmbeddingSet.load(edir / "vectors.txt"), ehash

        def make_debiased(d):
            out, _, report = hard_debias(EmbeddingSet.load(edir / "vectors.txt"), lexicons[lang])
            out.save(d / "vectors.txt")
            (d / "skipped.tsv").write_text(report.to_tsv(), encoding="utf-8")

        ddir, dhash = cache.run("debias", lang, {"embeddings": ehash, "lexicon": lex_hash[lang]}, make_debiased)
        return EmbeddingSet.load(ddir / "vectors.txt"), dhash

    # occupations test suite
    occ_source = cfg.occupations
    occ_hash = sha256_file(occ_source) if occ_source else "bundled:" + sha256_obj(
        [dataclasses.astuple(o) for o in bundled_occupations()])

    def make_suite(d):
        occs = read_occupations(occ_source) if occ_source else bundled_occupations()
        generate_occupations_test(occs, cfg.female_name, cfg.male_name).save(d / "suite.tsv")

    sdir, shash = cache.run("occtest-gen", "", {"occupations": occ_hash, "female": cfg.female_name,
                                                "male": cfg.male_name}, make_suite)
    suite = OccupationsTestSuite.load(sdir / "suite.tsv")
    test_hash = {"src": sha256_file(cfg.test_src), "ref": sha256_file(cfg.test_ref)} if cfg.test_src else None

    rows = []
    for variant, side in cfg.cells():
        cell = f"{variant}__{side}" + ("__frozen" if cfg.freeze and side != "none" else "")
        src_emb = tgt_emb = None
        emb_hash = {}
        if side in ("encoder", "both"):
            src_emb, emb_hash["src"] = embeddings_for("src", variant)
        if side in ("decoder", "both"):
            tgt_emb, emb_hash["tgt"] = embeddings_for("tgt", variant)

        model_cfg = TransformerConfig(cfg.d_model, cfg.heads, cfg.layers, cfg.ff_dim, cfg.dropout,
                                      cfg.max_len, cfg.label_smoothing, cfg.seed)
        train_cfg = TrainingConfig(cfg.steps, cfg.batch_size, cfg.lr_factor, cfg.warmup)

        def make_model(d, src_emb=src_emb, tgt_emb=tgt_emb, side=side):
            corpus = ParallelCorpus.read(cfg.train_src, cfg.train_tgt, cfg.lowercase)
            src_vocab = build_vocab(corpus.source, cfg.nmt_min_count)
            tgt_vocab = build_vocab(corpus.target, cfg.nmt_min_count)
            model = Transformer(model_cfg, len(src_vocab), len(tgt_vocab))
            inject_embeddings(model, InjectionSpec(side, cfg.freeze and side != "none", src_emb, tgt_emb),
                              src_vocab, tgt_vocab)
            trace = train(model, corpus, src_vocab, tgt_vocab, train_cfg)
            save_checkpoint(model, d / "model.nmt", src_vocab, tgt_vocab)
            with open(d / "loss.tsv", "w") as fh:
                fh.writelines(f"{k}\t{v:.6f}\n" for k, v in enumerate(trace, 1))

        mdir, mhash = cache.run("nmt-train", cell, {
            "corpus": corpus_hash, "embeddings": emb_hash, "side": side, "freeze": cfg.freeze,
            "model": dataclasses.asdict(model_cfg), "train": dataclasses.asdict(train_cfg),
            "lowercase": cfg.lowercase, "min_count": cfg.nmt_min_count,
        }, make_model)

        def make_translations(d, mdir=mdir):
            model, sv, tv = load_checkpoint(mdir / "model.nmt")
            occ_in = [s.lower().split() if cfg.lowercase else s.split() for s in suite.sources]
            _write_lines(d / "occupations.hyp", [translate(model, s, sv, tv, cfg.beam) for s in occ_in])
            if cfg.test_src:
                test_in = read_sentences(cfg.test_src, cfg.lowercase)
                _write_lines(d / "test.hyp", [translate(model, s, sv, tv, cfg.beam) for s in test_in])

        tdir, thash = cache.run("translate", cell, {"model": mhash, "suite": shash, "test": test_hash,
                                                    "beam": cfg.beam, "lowercase": cfg.lowercase},
                                make_translations)

        def make_reports(d, tdir=tdir, cell=cell):
            occ_hyp = (tdir / "occupations.hyp").read_text(encoding="utf-8").splitlines()
            if cfg.test_src:
                hyp = (tdir / "test.hyp").read_text(encoding="utf-8").splitlines()
                refs = [" ".join(s) for s in read_sentences(cfg.test_ref, cfg.lowercase)]
            else:
                hyp = occ_hyp
                refs = [r.lower() if cfg.lowercase else r for r in suite.references]
            (d / "bleu.json").write_text(bleu(hyp, refs).to_json() + "\n", encoding="utf-8")
            report = analyze_gender(occ_hyp, suite, cfg.female_name, cfg.male_name)
            (d / "gender.tsv").write_text(report.to_tsv(cell), encoding="utf-8")
            (d / "gender.json").write_text(report.to_json() + "\n", encoding="utf-8")

        rdir, rhash = cache.run("report", cell, {"translations": thash, "test": test_hash, "suite": shash},
                                make_reports)
        cell_dir = root / "cells" / cell
        cell_dir.mkdir(parents=True, exist_ok=True)
        for src_dir in (mdir, tdir, rdir):
            for p in sorted(src_dir.iterdir()):
                if p.name != ".done":
                    shutil.copyfile(p, cell_dir / p.name)
        bleu_score = json.loads((rdir / "bleu.json").read_text())["score"]
        gender = json.loads((rdir / "gender.json").read_text())
        pct = gender["percentages"]
        rows.append([cell, variant, side, str(cfg.freeze and side != "none").lower(), f"{bleu_score:.2f}",
                     f"{pct.get('her', {}).get('amiga', 0.0):.1f}", f"{pct.get('him', {}).get('amigo', 0.0):.1f}",
                     f"{pct.get('female_name', {}).get('amiga', 0.0):.1f}",
                     f"{pct.get('male_name', {}).get('amigo', 0.0):.1f}"])

    header = ["cell", "variant", "side", "freeze", "bleu", "her_amiga", "him_amigo",
              f"{cfg.female_name}_amiga", f"{cfg.male_name}_amigo"]
    with open(root / "summary.tsv", "w", encoding="utf-8", newline="\n") as fh:
        fh.write("\t".join(header) + "\n")
        for r in rows:
            fh.write("\t".join(r) + "\n")

    manifest = {
        "versions": _versions(),
        "seed": cfg.seed,
        "config": dataclasses.asdict(cfg),
        "cells": [r[0] for r in rows],
        "stages": cache.records,
        "summary_hash": sha256_file(root / "summary.tsv"),
    }
    (root / "manifest.json").write_text(json.dumps(manifest, indent=2, sort_keys=True) + "\n", encoding="utf-8")
    return root


def _versions() -> dict:
    import numpy
    import scipy
    import sklearn
    import torch

    return {"nmtdebias": __version__, "numpy": numpy.__version__, "scipy": scipy.__version__,
            "scikit-learn": sklearn.__version__, "torch": torch.__version__,
            "python": sys.version.split()[0]}

