"""A small encoder-decoder Transformer."""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
import torch
import torch.nn.functional as F
from torch import nn

from ..corpus import PAD_ID


@dataclass
class TransformerConfig:
    d_model: int = 64
    heads: int = 4
    layers: int = 2
    ff_dim: int = 256
    dropout: float = 0.1
    max_len: int = 64
    label_smoothing: float = 0.1
    seed: int = 0

    def __post_init__(self):
        for name in ("d_model", "heads", "layers", "ff_dim", "max_len"):
            if getattr(self, name) < 1:
                raise ValueError(f"{name} must be >= 1")
        if self.d_model % self.heads:
            raise ValueError(f"d_model={self.d_model} is not divisible by heads={self.heads}")
        if not 0 <= self.dropout < 1 or not 0 <= self.label_smoothing < 1:
            raise ValueError("dropout and label_smoothing must lie in [0, 1)")


def positional_encoding(position: int, d_model: int) -> np.ndarray:
    """Sinusoidal encoding: sin on even indices, cos on odd ones."""
    i = np.arange(d_model)
    angle = position / np.power(10000.0, (i - i % 2) / d_model)
    return np.where(i % 2 == 0, np.sin(angle), np.cos(angle))


def positional_table(max_len: int, d_model: int) -> torch.Tensor:
    return torch.tensor(np.stack([positional_encoding(p, d_model) for p in range(max_len)]),
                        dtype=torch.float32)


def scaled_attention(Q, K, V, mask=None, return_weights=False):
    """``softmax(Q K^T / sqrt(d_k)) V`` over the last two dimensions.

    ``mask`` is boolean and broadcastable to the score matrix; True marks a
    position that may not be attended to.
    """
    scores = Q @ K.transpose(-2, -1) / math.sqrt(Q.shape[-1])
    if mask is not None:
        if bool(mask.all(dim=-1).any()):
            raise ValueError("empty attention row")
        scores = scores.masked_fill(mask, float("-inf"))
    weights = torch.softmax(scores, dim=-1)
    out = weights @ V
    return (out, weights) if return_weights else out


class MultiHeadAttention(nn.Module):
    def __init__(self, d_model, heads, dropout):
        super().__init__()
        self.heads = heads
        self.q = nn.Linear(d_model, d_model)
        self.k = nn.Linear(d_model, d_model)
        self.v = nn.Linear(d_model, d_model)
        self.o = nn.Linear(d_model, d_model)
        self.drop = nn.Dropout(dropout)
        self.last_weights = None

    def _split(self, x):
        b, n, d = x.shape
        return x.view(b, n, self.heads, d // self.heads).transpose(1, 2)

    def forward(self, query, key, value, mask=None):
        b, n, d = query.shape
        q, k, v = self._split(self.q(query)), self._split(self.k(key)), self._split(self.v(value))
        out, w = scaled_attention(q, k, v, None if mask is None else mask.unsqueeze(1), return_weights=True)
        self.last_weights = w.detach()
        out = out.transpose(1, 2).reshape(b, n, d)
        return self.o(self.drop(out))


class FeedForward(nn.Sequential):
    def __init__(self, d_model, ff_dim, dropout):
        super().__init__(nn.Linear(d_model, ff_dim), nn.ReLU(), nn.Dropout(dropout), nn.Linear(ff_dim, d_model))


class EncoderLayer(nn.Module):
    def __init__(self, cfg: TransformerConfig):
        super().__init__()
        self.attn = MultiHeadAttention(cfg.d_model, cfg.heads, cfg.dropout)
        self.ff = FeedForward(cfg.d_model, cfg.ff_dim, cfg.dropout)
        self.norm1 = nn.LayerNorm(cfg.d_model)
        self.norm2 = nn.LayerNorm(cfg.d_model)
        self.drop = nn.Dropout(cfg.dropout)

    def forward(self, x, mask):
        h = self.norm1(x)
        x = x + self.drop(self.attn(h, h, h, mask))
        return x + self.drop(self.ff(self.norm2(x)))


class DecoderLayer(nn.Module):
    def __init__(self, cfg: TransformerConfig):
        super().__init__()
        self.self_attn = MultiHeadAttention(cfg.d_model, cfg.heads, cfg.dropout)
        self.cross_attn = MultiHeadAttention(cfg.d_model, cfg.heads, cfg.dropout)
        self.ff = FeedForward(cfg.d_model, cfg.ff_dim, cfg.dropout)
        self.norm1 = nn.LayerNorm(cfg.d_model)
        self.norm2 = nn.LayerNorm(cfg.d_model)
        self.norm3 = nn.LayerNorm(cfg.d_model)
        self.drop = nn.Dropout(cfg.dropout)

    def forward(self, y, memory, self_mask, memory_mask):
        h = self.norm1(y)
        y = y + self.drop(self.self_attn(h, h, h, self_mask))
        h = self.norm2(y)
        y = y + self.drop(self.cross_attn(h, memory, memory, memory_mask))
        return y + self.drop(self.ff(self.norm3(y)))


class Transformer(nn.Module):
    """Pre-norm encoder-decoder with separate source and target embedding tables.

    ``frozen`` names the embedding sides (``"encoder"``, ``"decoder"``)
    excluded from training.
    """

    def __init__(self, cfg: TransformerConfig, src_vocab_size: int, tgt_vocab_size: int):
        super().__init__()
        self.cfg = cfg
        with torch.random.fork_rng():
            torch.manual_seed(cfg.seed)
            self.src_embed = nn.Embedding(src_vocab_size, cfg.d_model, padding_idx=PAD_ID)
            self.tgt_embed = nn.Embedding(tgt_vocab_size, cfg.d_model, padding_idx=PAD_ID)
            self.encoder = nn.ModuleList(EncoderLayer(cfg) for _ in range(cfg.layers))
            self.decoder = nn.ModuleList(DecoderLayer(cfg) for _ in range(cfg.layers))
            self.enc_norm = nn.LayerNorm(cfg.d_model)
            self.dec_norm = nn.LayerNorm(cfg.d_model)
            self.out = nn.Linear(cfg.d_model, tgt_vocab_size)
            for emb in (self.src_embed, self.tgt_embed):
                nn.init.normal_(emb.weight, std=cfg.d_model ** -0.5)
                with torch.no_grad():
                    emb.weight[PAD_ID].zero_()
        self.register_buffer("pos", positional_table(cfg.max_len, cfg.d_model), persistent=False)
        self.drop = nn.Dropout(cfg.dropout)
        self.frozen: set[str] = set()
        self.step = 0

    def embed(self, table: nn.Embedding, ids):
        n = ids.shape[1]
        if n > self.cfg.max_len:
            raise ValueError(f"sequence of length {n} exceeds max_len={self.cfg.max_len}")
        x = table(ids) * math.sqrt(self.cfg.d_model) + self.pos[:n].to(table.weight.dtype)
        return self.drop(x)

    def encode(self, src):
        pad = (src == PAD_ID)[:, None, :]
        x = self.embed(self.src_embed, src)
        for layer in self.encoder:
            x = layer(x, pad)
        return self.enc_norm(x), pad

    def decode(self, tgt, memory, memory_pad):
        n = tgt.shape[1]
        causal = torch.triu(torch.ones(n, n, dtype=torch.bool, device=tgt.device), 1)
        self_mask = causal[None] | (tgt == PAD_ID)[:, None, :]
        y = self.embed(self.tgt_embed, tgt)
        for layer in self.decoder:
            y = layer(y, memory, self_mask, memory_pad)
        return self.out(self.dec_norm(y))

    def forward(self, src, tgt_in):
        memory, pad = self.encode(src)
        return self.decode(tgt_in, memory, pad)

    def loss(self, src, tgt_in, tgt_out):
        logits = self(src, tgt_in)
        return F.cross_entropy(
            logits.reshape(-1, logits.shape[-1]), tgt_out.reshape(-1),
            ignore_index=PAD_ID, label_smoothing=self.cfg.label_smoothing,
        )

    def freeze(self, side: str, frozen: bool = True):
        table = {"encoder": self.src_embed, "decoder": self.tgt_embed}[side]
        table.weight.requires_grad_(not frozen)
        (self.frozen.add if frozen else self.frozen.discard)(side)
