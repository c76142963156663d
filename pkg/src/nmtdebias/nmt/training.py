"""Embedding injection, teacher-forced training and checkpoints."""
from __future__ import annotations

import json
import logging
import math
import struct
from dataclasses import asdict, dataclass, field
from pathlib import Path

import numpy as np
import torch

from ..corpus import BOS_ID, EOS_ID, PAD_ID, SPECIALS, ParallelCorpus, Vocabulary
from ..embeddings import EmbeddingSet
from ..exceptions import DivergenceError
from .model import Transformer, TransformerConfig

logger = logging.getLogger(__name__)

SIDES = ("none", "encoder", "decoder", "both")
CHECKPOINT_MAGIC = b"NMT1"


@dataclass
class TrainingConfig:
    steps: int = 2000
    batch_size: int = 32
    lr_factor: float = 2.0
    warmup: int = 400
    checkpoint_every: int = 0
    checkpoint_dir: str | None = None

    def __post_init__(self):
        if self.steps < 0 or self.batch_size < 1 or self.warmup < 1:
            raise ValueError("steps >= 0, batch_size >= 1 and warmup >= 1 are required")


@dataclass
class InjectionSpec:
    side: str = "none"
    freeze: bool = False
    source_embeddings: EmbeddingSet | None = None
    target_embeddings: EmbeddingSet | None = None

    def __post_init__(self):
        if self.side not in SIDES:
            raise ValueError(f"side must be one of {SIDES}, got {self.side!r}")
        need_src = self.side in ("encoder", "both")
        need_tgt = self.side in ("decoder", "both")
        if need_src != (self.source_embeddings is not None):
            raise ValueError(f"side={self.side!r}: source embeddings must be given iff the encoder is injected")
        if need_tgt != (self.target_embeddings is not None):
            raise ValueError(f"side={self.side!r}: target embeddings must be given iff the decoder is injected")


@dataclass
class InjectionReport:
    covered: dict = field(default_factory=dict)
    fallback: dict = field(default_factory=dict)


def inject_embeddings(model: Transformer, spec: InjectionSpec, src_vocab: Vocabulary,
                      tgt_vocab: Vocabulary) -> InjectionReport:
    """Overwrite embedding rows with pre-trained vectors, in place.

    Words without a pre-trained vector keep their random initialisation; the
    count is logged and returned. Injected tables are frozen when
    ``spec.freeze`` is set.
    """
    report = InjectionReport()
    jobs = []
    if spec.side in ("encoder", "both"):
        jobs.append(("encoder", model.src_embed, spec.source_embeddings, src_vocab))
    if spec.side in ("decoder", "both"):
        jobs.append(("decoder", model.tgt_embed, spec.target_embeddings, tgt_vocab))
    for side, table, emb, vocab in jobs:
        if emb.dim != model.cfg.d_model:
            raise ValueError(f"{side} embeddings: expected dim {model.cfg.d_model}, got {emb.dim}")
        rows, vecs = [], []
        for k, tok in enumerate(vocab.tokens):
            if tok in SPECIALS:
                continue
            if tok in emb:
                rows.append(k)
                vecs.append(emb[tok])
        with torch.no_grad():
            if rows:
                table.weight[rows] = torch.tensor(np.array(vecs), dtype=table.weight.dtype)
            table.weight[PAD_ID].zero_()
        report.covered[side] = len(rows)
        report.fallback[side] = len(vocab) - len(SPECIALS) - len(rows)
        logger.info("%s: %d words injected, %d kept random init", side, len(rows), report.fallback[side])
        if spec.freeze:
            model.freeze(side)
    return report


def encode_batch(sentences, vocab: Vocabulary, bos=False, eos=True) -> torch.Tensor:
    seqs = [([BOS_ID] if bos else []) + vocab.encode(s) + ([EOS_ID] if eos else []) for s in sentences]
    n = max(len(s) for s in seqs)
    return torch.tensor([s + [PAD_ID] * (n - len(s)) for s in seqs], dtype=torch.long)


def noam_rate(step: int, d_model: int, warmup: int, factor: float) -> float:
    step = max(step, 1)
    return factor * d_model ** -0.5 * min(step ** -0.5, step * warmup ** -1.5)


def train(model: Transformer, corpus: ParallelCorpus, src_vocab: Vocabulary, tgt_vocab: Vocabulary,
          config: TrainingConfig | None = None) -> list[float]:
    """Teacher-forced training with label smoothing; returns the per-step loss trace.

    Batches are drawn from a seeded permutation of the corpus, so two runs
    with the same model seed produce the same trace.
    """
    config = config or TrainingConfig()
    if len(corpus) == 0:
        raise ValueError("empty corpus")
    longest = max(max(len(s) for s in corpus.source), max(len(t) for t in corpus.target)) + 1
    if longest > model.cfg.max_len:
        raise ValueError(f"sentence of {longest - 1} tokens exceeds max_len={model.cfg.max_len}")

    params = [p for p in model.parameters() if p.requires_grad]
    opt = torch.optim.Adam(params, lr=1.0, betas=(0.9, 0.98), eps=1e-9)
    gen = np.random.default_rng(model.cfg.seed)
    n = len(corpus)
    bs = min(config.batch_size, n)
    order, pos = gen.permutation(n), 0
    trace = []
    model.train()
    with torch.random.fork_rng():
        torch.manual_seed(model.cfg.seed + 1)
        for _ in range(config.steps):
            if pos + bs > n:
                order, pos = gen.permutation(n), 0
            idx = order[pos:pos + bs]
            pos += bs
            src = encode_batch([corpus.source[k] for k in idx], src_vocab)
            tgt = encode_batch([corpus.target[k] for k in idx], tgt_vocab, bos=True)
            model.step += 1
            for group in opt.param_groups:
                group["lr"] = noam_rate(model.step, model.cfg.d_model, config.warmup, config.lr_factor)
            loss = model.loss(src, tgt[:, :-1], tgt[:, 1:])
            value = float(loss.detach())
            if not math.isfinite(value):
                raise DivergenceError(f"step {model.step}", value)
            opt.zero_grad()
            loss.backward()
            opt.step()
            trace.append(value)
            if config.checkpoint_every and config.checkpoint_dir and model.step % config.checkpoint_every == 0:
                Path(config.checkpoint_dir).mkdir(parents=True, exist_ok=True)
                save_checkpoint(model, Path(config.checkpoint_dir) / f"step{model.step:06d}.nmt",
                                src_vocab, tgt_vocab)
    model.eval()
    return trace


def save_checkpoint(model: Transformer, path, src_vocab: Vocabulary, tgt_vocab: Vocabulary) -> None:
    """``NMT1`` magic, length-prefixed JSON config block, then float32 LE tensors."""
    state = model.state_dict()
    header = {
        "config": asdict(model.cfg),
        "step": model.step,
        "frozen": sorted(model.frozen),
        "src_vocab": src_vocab.tokens,
        "tgt_vocab": tgt_vocab.tokens,
        "tensors": [[name, list(t.shape)] for name, t in state.items()],
    }
    block = json.dumps(header, sort_keys=True, ensure_ascii=False).encode("utf-8")
    with open(path, "wb") as fh:
        fh.write(CHECKPOINT_MAGIC)
        fh.write(struct.pack("<I", len(block)))
        fh.write(block)
        for t in state.values():
            fh.write(t.detach().cpu().numpy().astype("<f4").tobytes())


def load_checkpoint(path):
    """Return ``(model, src_vocab, tgt_vocab)``."""
    raw = Path(path).read_bytes()
    if not raw.startswith(CHECKPOINT_MAGIC):
        raise ValueError(f"{path}: not an NMT checkpoint (bad magic)")
    (size,) = struct.unpack_from("<I", raw, 4)
    header = json.loads(raw[8:8 + size].decode("utf-8"))
    src_vocab, tgt_vocab = Vocabulary(header["src_vocab"]), Vocabulary(header["tgt_vocab"])
    model = Transformer(TransformerConfig(**header["config"]), len(src_vocab), len(tgt_vocab))
    offset = 8 + size
    state = {}
    for name, shape in header["tensors"]:
        count = int(np.prod(shape))
        arr = np.frombuffer(raw, dtype="<f4", count=count, offset=offset).reshape(shape)
        state[name] = torch.tensor(arr.copy())
        offset += 4 * count
    model.load_state_dict(state)
    model.step = header["step"]
    for side in header["frozen"]:
        model.freeze(side)
    model.eval()
    return model, src_vocab, tgt_vocab
