"""Tokenization, vocabularies and windowed co-occurrence counts."""
from __future__ import annotations

import re
from collections import Counter
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np
import scipy.sparse as sp

UNK, PAD, BOS, EOS = "<unk>", "<pad>", "<s>", "</s>"
SPECIALS = (UNK, PAD, BOS, EOS)
UNK_ID, PAD_ID, BOS_ID, EOS_ID = range(4)

_TOKEN_RE = re.compile(r"\w+(?:['’]\w+)*|[^\w\s]")
_CLITIC_RE = re.compile(r"^(.+?)(['’](?:ve|s))$", re.IGNORECASE)

COOC_MAGIC = b"COOC1"
_TRIPLE = np.dtype([("i", "<u4"), ("j", "<u4"), ("w", "<f8")])


def tokenize(text: str, lowercase: bool = False) -> list[str]:
    """Split ``text`` into word and punctuation tokens.

    Apostrophe contractions stay whole, except the clitics ``'ve`` and
    ``'s`` which become their own token ("I've" -> "I", "'ve").
    """
    if lowercase:
        text = text.lower()
    tokens = []
    for tok in _TOKEN_RE.findall(text):
        m = _CLITIC_RE.match(tok)
        if m:
            tokens.extend(m.groups())
        else:
            tokens.append(tok)
    return tokens


def read_sentences(path, lowercase: bool = False) -> list[list[str]]:
    """Read a sentence-per-line UTF-8 file; empty lines are dropped."""
    out = []
    with open(path, encoding="utf-8") as fh:
        for line in fh:
            toks = tokenize(line, lowercase=lowercase)
            if toks:
                out.append(toks)
    return out


class Vocabulary:
    """Token <-> index map. Indices 0-3 hold the special tokens."""

    def __init__(self, tokens: Sequence[str], counts: dict[str, int] | None = None):
        tokens = list(tokens)
        if tuple(tokens[: len(SPECIALS)]) != SPECIALS:
            tokens = list(SPECIALS) + [t for t in tokens if t not in SPECIALS]
        if len(set(tokens)) != len(tokens):
            raise ValueError("duplicate tokens in vocabulary")
        self.tokens = tokens
        self.counts = dict(counts or {})
        self.index = {t: i for i, t in enumerate(tokens)}

    def __len__(self):
        return len(self.tokens)

    def __contains__(self, token):
        return token in self.index

    def __iter__(self):
        return iter(self.tokens)

    def __eq__(self, other):
        return isinstance(other, Vocabulary) and self.tokens == other.tokens and self.counts == other.counts

    def __repr__(self):
        return f"Vocabulary(size={len(self)})"

    @property
    def words(self) -> list[str]:
        """Non-special tokens in index order."""
        return self.tokens[len(SPECIALS):]

    def id(self, token: str) -> int:
        return self.index.get(token, UNK_ID)

    def encode(self, tokens: Iterable[str]) -> list[int]:
        return [self.index.get(t, UNK_ID) for t in tokens]

    def decode(self, ids: Iterable[int]) -> list[str]:
        return [self.tokens[i] for i in ids]

    def save(self, path) -> None:
        with open(path, "w", encoding="utf-8") as fh:
            for tok in self.tokens:
                fh.write(f"{tok} {self.counts.get(tok, 0)}\n")

    @classmethod
    def load(cls, path) -> "Vocabulary":
        tokens, counts = [], {}
        with open(path, encoding="utf-8") as fh:
            for line in fh:
                line = line.rstrip("\n")
                if not line:
                    continue
                tok, _, cnt = line.rpartition(" ")
                tokens.append(tok)
                if tok not in SPECIALS:
                    counts[tok] = int(cnt)
        return cls(tokens, counts)


def build_vocab(corpus: Iterable[Sequence[str]], min_count: int = 5) -> Vocabulary:
    """Count tokens and keep those seen at least ``min_count`` times.

    Ordering is by descending count, ties broken lexicographically, so the
    written vocabulary file is byte-stable.
    """
    if min_count < 1:
        raise ValueError("min_count must be >= 1")
    counts = Counter(t for sent in corpus for t in sent if t not in SPECIALS)
    kept = sorted((t for t, c in counts.items() if c >= min_count), key=lambda t: (-counts[t], t))
    if not kept:
        raise ValueError("empty vocabulary")
    return Vocabulary(list(SPECIALS) + kept, {t: counts[t] for t in kept})


@dataclass(frozen=True)
class CoocMatrix:
    """Sparse symmetric co-occurrence weights, entries sorted by (i, j)."""

    rows: np.ndarray
    cols: np.ndarray
    weights: np.ndarray
    vocab_size: int

    @classmethod
    def from_scipy(cls, mat, vocab_size: int | None = None) -> "CoocMatrix":
        coo = sp.coo_matrix(mat)
        coo.sum_duplicates()
        keep = coo.data > 0
        r, c, w = coo.row[keep], coo.col[keep], coo.data[keep]
        order = np.lexsort((c, r))
        return cls(
            r[order].astype(np.int64),
            c[order].astype(np.int64),
            w[order].astype(np.float64),
            int(vocab_size if vocab_size is not None else coo.shape[0]),
        )

    def __len__(self):
        return len(self.weights)

    def __add__(self, other: "CoocMatrix") -> "CoocMatrix":
        n = max(self.vocab_size, other.vocab_size)
        return CoocMatrix.from_scipy(self.to_scipy(n) + other.to_scipy(n), n)

    def to_scipy(self, n: int | None = None) -> sp.csr_matrix:
        n = n or self.vocab_size
        return sp.csr_matrix((self.weights, (self.rows, self.cols)), shape=(n, n))

    def get(self, i: int, j: int) -> float:
        pos = np.searchsorted(self.rows, i, side="left")
        end = np.searchsorted(self.rows, i, side="right")
        k = pos + np.searchsorted(self.cols[pos:end], j)
        if k < end and self.cols[k] == j:
            return float(self.weights[k])
        return 0.0

    def save(self, path) -> None:
        arr = np.empty(len(self), dtype=_TRIPLE)
        arr["i"], arr["j"], arr["w"] = self.rows, self.cols, self.weights
        with open(path, "wb") as fh:
            fh.write(COOC_MAGIC)
            fh.write(np.array([self.vocab_size], dtype="<u4").tobytes())
            fh.write(arr.tobytes())

    @classmethod
    def load(cls, path) -> "CoocMatrix":
        raw = Path(path).read_bytes()
        if not raw.startswith(COOC_MAGIC):
            raise ValueError(f"{path}: not a co-occurrence file (bad magic)")
        off = len(COOC_MAGIC)
        vocab_size = int(np.frombuffer(raw, dtype="<u4", count=1, offset=off)[0])
        arr = np.frombuffer(raw, dtype=_TRIPLE, offset=off + 4)
        return cls(
            arr["i"].astype(np.int64), arr["j"].astype(np.int64), arr["w"].astype(np.float64), vocab_size
        )


def count_cooccurrences(
    corpus: Iterable[Sequence[str]],
    vocab: Vocabulary,
    window: int = 15,
    distance_weighting: bool = True,
) -> CoocMatrix:
    """Accumulate symmetric windowed co-occurrence weights.

    Each pair of in-vocabulary tokens at distance ``d <= window`` inside the
    same sentence adds ``1/d`` (or 1 when unweighted) to both (i, j) and
    (j, i). Out-of-vocabulary and special tokens keep their position but
    contribute nothing.
    """
    if window < 1:
        raise ValueError("window must be >= 1")
    ids, sent_ids = [], []
    for k, sent in enumerate(corpus):
        enc = [vocab.index.get(t, -1) for t in sent]
        ids.extend(enc)
        sent_ids.extend([k] * len(enc))
    n = len(vocab)
    if not ids:
        return CoocMatrix.from_scipy(sp.coo_matrix((n, n)), n)
    ids = np.asarray(ids, dtype=np.int64)
    ids[ids < len(SPECIALS)] = -1
    sent_ids = np.asarray(sent_ids, dtype=np.int64)

    r, c, w = [], [], []
    for d in range(1, min(window, len(ids) - 1) + 1):
        a, b = ids[:-d], ids[d:]
        ok = (sent_ids[:-d] == sent_ids[d:]) & (a >= 0) & (b >= 0)
        r.append(a[ok])
        c.append(b[ok])
        w.append(np.full(int(ok.sum()), 1.0 / d if distance_weighting else 1.0))
    if r:
        r, c, w = np.concatenate(r), np.concatenate(c), np.concatenate(w)
    else:
        r = c = np.zeros(0, dtype=np.int64)
        w = np.zeros(0)
    forward = sp.csr_matrix((w, (r, c)), shape=(n, n))
    return CoocMatrix.from_scipy(forward + forward.T, n)


@dataclass
class ParallelCorpus:
    """Line-aligned source/target token sequences."""

    source: list[list[str]]
    target: list[list[str]]
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        if len(self.source) != len(self.target):
            raise ValueError(
                f"parallel corpus sides differ in length: {len(self.source)} vs {len(self.target)}"
            )
        for k, (s, t) in enumerate(zip(self.source, self.target)):
            if not s or not t:
                raise ValueError(f"empty sentence at line {k + 1}")

    def __len__(self):
        return len(self.source)

    @classmethod
    def read(cls, source_path, target_path, lowercase: bool = False) -> "ParallelCorpus":
        """Read two line-aligned files; pairs where either side is blank are dropped."""
        with open(source_path, encoding="utf-8") as fs, open(target_path, encoding="utf-8") as ft:
            src_lines, tgt_lines = fs.read().splitlines(), ft.read().splitlines()
        if len(src_lines) != len(tgt_lines):
            raise ValueError(
                f"parallel corpus sides differ in length: {len(src_lines)} vs {len(tgt_lines)}"
            )
        src, tgt = [], []
        for s, t in zip(src_lines, tgt_lines):
            s, t = tokenize(s, lowercase), tokenize(t, lowercase)
            if s and t:
                src.append(s)
                tgt.append(t)
        return cls(src, tgt)
