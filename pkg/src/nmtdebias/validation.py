"""Input validation helpers shared by the estimators."""
from __future__ import annotations

from .embeddings import EmbeddingSet


def check_sentences(X, name="X") -> list[list[str]]:
    """Coerce a sequence of sentences to token lists.

    Strings are split on whitespace (they are assumed already tokenized).
    """
    if isinstance(X, str):
        raise TypeError(f"{name} must be a sequence of sentences, not a single string")
    out = []
    for k, s in enumerate(X):
        if isinstance(s, str):
            s = s.split()
        else:
            s = list(s)
        if not all(isinstance(t, str) for t in s):
            raise TypeError(f"{name}[{k}] must contain string tokens")
        out.append(s)
    return out


def check_embeddings(emb, dim: int | None = None, name="embeddings") -> EmbeddingSet:
    if not isinstance(emb, EmbeddingSet):
        raise TypeError(f"{name} must be an EmbeddingSet, got {type(emb).__name__}")
    if dim is not None and emb.dim != dim:
        raise ValueError(f"{name}: expected dim {dim}, got {emb.dim}")
    return emb
