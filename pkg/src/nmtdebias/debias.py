"""Hard debiasing: gender direction, neutralize, equalize."""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from sklearn.base import BaseEstimator, TransformerMixin
from sklearn.utils.validation import check_is_fitted

from .embeddings import EmbeddingSet
from .lexicon import GenderLexicon

_PARALLEL_TOL = 1e-12


@dataclass(frozen=True)
class GenderDirection:
    vector: np.ndarray

    def __post_init__(self):
        v = np.asarray(self.vector, dtype=np.float64)
        if abs(np.linalg.norm(v) - 1.0) > 1e-9:
            raise ValueError("gender direction must be a unit vector")
        object.__setattr__(self, "vector", v)

    def __array__(self, dtype=None, copy=None):
        return self.vector if dtype is None else self.vector.astype(dtype)


@dataclass
class DebiasReport:
    """Words and pairs that were skipped, and neutral words absent from the vocabulary."""

    skipped: list[tuple[str, str]] = field(default_factory=list)
    missing_neutral: int = 0

    def add(self, item: str, reason: str):
        self.skipped.append((item, reason))

    def to_tsv(self) -> str:
        return "".join(f"{item}\t{reason}\n" for item, reason in self.skipped)


def _unit(g) -> np.ndarray:
    return g.vector if isinstance(g, GenderDirection) else np.asarray(g, dtype=np.float64)


def gender_direction(emb: EmbeddingSet, pairs) -> GenderDirection:
    """Top principal component of the pair-centred definitional vectors.

    The sign is fixed so the female (first) word of the first usable pair
    projects above its partner.
    """
    usable = [(a, b) for a, b in pairs if a in emb and b in emb]
    if not usable:
        raise ValueError("no definitional pairs in vocabulary")
    rows = []
    for a, b in usable:
        mu = (emb[a] + emb[b]) / 2
        rows += [emb[a] - mu, emb[b] - mu]
    _, s, vt = np.linalg.svd(np.array(rows), full_matrices=False)
    if s[0] == 0:
        raise ValueError("definitional pairs have identical vectors; direction undefined")
    g = vt[0] / np.linalg.norm(vt[0])
    a, b = usable[0]
    if np.dot(emb[a] - emb[b], g) < 0:
        g = -g
    return GenderDirection(g)


def neutralize(emb: EmbeddingSet, g, words, report: DebiasReport | None = None) -> EmbeddingSet:
    """Remove the ``g`` component of each listed word and renormalise it."""
    g = _unit(g)
    out = emb.copy()
    report = report if report is not None else DebiasReport()
    idx = []
    for w in words:
        if w in out:
            idx.append(out.index[w])
        else:
            report.missing_neutral += 1
    if not idx:
        return out
    idx = np.array(idx)
    V = out.vectors[idx]
    resid = V - np.outer(V @ g, g)
    norms = np.linalg.norm(resid, axis=1)
    ok = norms >= _PARALLEL_TOL
    for k in np.flatnonzero(~ok):
        report.add(out.words[idx[k]], "parallel to gender direction")
    R = resid[ok] / norms[ok, None]
    # second pass removes the g component left by cancellation in near-parallel rows
    R -= np.outer(R @ g, g)
    out.vectors[idx[ok]] = R / np.linalg.norm(R, axis=1, keepdims=True)
    return out


def equalize(emb: EmbeddingSet, g, pairs, report: DebiasReport | None = None) -> EmbeddingSet:
    """Move each pair to unit-norm mirror images across the hyperplane normal to ``g``."""
    g = _unit(g)
    out = emb.copy()
    report = report if report is not None else DebiasReport()
    for a, b in pairs:
        if a not in out or b not in out:
            report.add(f"{a},{b}", "pair member missing from vocabulary")
            continue
        va, vb = out[a].copy(), out[b].copy()
        mu = (va + vb) / 2
        mu_g = mu @ g
        nu = mu - mu_g * g
        sq = 1.0 - nu @ nu
        if sq <= 0:
            report.add(f"{a},{b}", "degenerate: off-axis mean has norm >= 1")
        radical = np.sqrt(max(0.0, sq))
        for word, v in ((a, va), (b, vb)):
            sign = -1.0 if v @ g - mu_g < 0 else 1.0
            out.vectors[out.index[word]] = nu + radical * sign * g
    return out


def hard_debias(emb: EmbeddingSet, lexicon: GenderLexicon, direction=None, normalize: bool = True):
    """Neutralize the lexicon's neutral words, then equalize its pairs.

    With ``normalize`` the definitional and equalize words are scaled to
    unit length first, as the method assumes unit vectors; raw GloVe norms
    are well above 1 and would make every equalize pair degenerate.
    Neutralize is scale-invariant, and words outside the lexicon's reach
    are left bit-identical either way.

    Returns ``(debiased, direction, report)``.
    """
    if direction is None:
        source = _unit_rows(emb, _pair_words(lexicon.definitional_pairs)) if normalize else emb
        direction = gender_direction(source, lexicon.definitional_pairs)
    report = DebiasReport()
    out = neutralize(emb, direction, lexicon.neutral_words(emb.words), report)
    if normalize:
        out = _unit_rows(out, _pair_words(lexicon.equalize_pairs))
    out = equalize(out, direction, lexicon.equalize_pairs, report)
    return out, direction, report


def _pair_words(pairs):
    return {w for p in pairs for w in p}


def _unit_rows(emb: EmbeddingSet, words) -> EmbeddingSet:
    out = emb.copy()
    idx = [out.index[w] for w in words if w in out]
    if idx:
        norms = np.linalg.norm(out.vectors[idx], axis=1, keepdims=True)
        out.vectors[idx] = np.divide(out.vectors[idx], norms, out=out.vectors[idx].copy(), where=norms > 0)
    return out


def direct_bias(emb: EmbeddingSet, g, words) -> float:
    """Mean absolute cosine between the words' vectors and ``g``."""
    words = list(words)
    if not words:
        raise ValueError("empty word list")
    missing = [w for w in words if w not in emb]
    if missing:
        raise KeyError(f"words not in embeddings: {missing}")
    g = _unit(g)
    V = np.stack([emb[w] for w in words])
    norms = np.linalg.norm(V, axis=1) * np.linalg.norm(g)
    cos = np.divide(V @ g, norms, out=np.zeros(len(words)), where=norms > 0)
    return float(np.mean(np.abs(cos)))


class HardDebias(BaseEstimator, TransformerMixin):
    """Post-processing debiaser for an :class:`EmbeddingSet`.

    ``fit`` finds the gender direction from the lexicon's definitional
    pairs; ``transform`` neutralizes and equalizes.
    """

    def __init__(self, lexicon: GenderLexicon | None = None, normalize: bool = True):
        self.lexicon = lexicon
        self.normalize = normalize

    def fit(self, X: EmbeddingSet, y=None):
        if self.lexicon is None:
            raise ValueError("HardDebias needs a lexicon")
        pairs = self.lexicon.definitional_pairs
        self.direction_ = gender_direction(_unit_rows(X, _pair_words(pairs)) if self.normalize else X, pairs)
        return self

    def transform(self, X: EmbeddingSet) -> EmbeddingSet:
        check_is_fitted(self, "direction_")
        if X.dim != len(self.direction_.vector):
            raise ValueError(f"expected dim {len(self.direction_.vector)}, got {X.dim}")
        out, _, self.report_ = hard_debias(X, self.lexicon, self.direction_, self.normalize)
        return out

    def score(self, X: EmbeddingSet, y=None) -> float:
        """Negative direct bias over neutral words (higher is less biased)."""
        check_is_fitted(self, "direction_")
        words = self.lexicon.neutral_words(X.words)
        return -direct_bias(X, self.direction_, words) if words else 0.0
