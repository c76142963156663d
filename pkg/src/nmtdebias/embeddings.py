"""Dense word-vector container and GloVe text format I/O."""
from __future__ import annotations

from typing import Iterable, Sequence

import numpy as np


class EmbeddingSet:
    """One ``dim``-dimensional vector per word.

    ``gender_coordinate`` marks a reserved dimension (set by gender-neutral
    training), or is None.
    """

    def __init__(self, words: Sequence[str], vectors, gender_coordinate: int | None = None):
        vectors = np.asarray(vectors, dtype=np.float64)
        if vectors.ndim != 2 or vectors.shape[0] != len(words):
            raise ValueError(
                f"expected a ({len(words)}, dim) array, got shape {vectors.shape}"
            )
        if not np.all(np.isfinite(vectors)):
            raise ValueError("embedding vectors must be finite")
        self.words = list(words)
        self.vectors = vectors
        self.gender_coordinate = gender_coordinate
        self.index = {w: i for i, w in enumerate(self.words)}
        if len(self.index) != len(self.words):
            raise ValueError("duplicate words in embedding set")

    @property
    def dim(self) -> int:
        return self.vectors.shape[1]

    def __len__(self):
        return len(self.words)

    def __contains__(self, word):
        return word in self.index

    def __getitem__(self, word) -> np.ndarray:
        return self.vectors[self.index[word]]

    def __repr__(self):
        return f"EmbeddingSet(words={len(self)}, dim={self.dim})"

    def copy(self) -> "EmbeddingSet":
        return EmbeddingSet(self.words, self.vectors.copy(), self.gender_coordinate)

    def subset(self, words: Iterable[str]) -> "EmbeddingSet":
        words = [w for w in words if w in self.index]
        return EmbeddingSet(words, self.vectors[[self.index[w] for w in words]], self.gender_coordinate)

    def to_text(self) -> str:
        lines = []
        for w, v in zip(self.words, self.vectors):
            lines.append(w + " " + " ".join(f"{x:.6g}" for x in v))
        return "\n".join(lines) + ("\n" if lines else "")

    def save(self, path) -> None:
        """Write GloVe text format: ``word v1 ... vd``, no header."""
        with open(path, "w", encoding="utf-8", newline="\n") as fh:
            fh.write(self.to_text())

    @classmethod
    def load(cls, path, gender_coordinate: int | None = None) -> "EmbeddingSet":
        """Read GloVe text format, with or without a ``count dim`` header."""
        words, rows = [], []
        with open(path, encoding="utf-8") as fh:
            lines = fh.read().splitlines()
        if lines:
            head = lines[0].split()
            if len(head) == 2 and all(p.isdigit() for p in head):
                lines = lines[1:]
        for line in lines:
            parts = line.rstrip().split(" ")
            if len(parts) < 2:
                continue
            words.append(parts[0])
            rows.append([float(x) for x in parts[1:]])
        dims = {len(r) for r in rows}
        if len(dims) > 1:
            raise ValueError(f"{path}: inconsistent vector dimensions {sorted(dims)}")
        vectors = np.array(rows, dtype=np.float64).reshape(len(rows), dims.pop() if dims else 0)
        return cls(words, vectors, gender_coordinate)
