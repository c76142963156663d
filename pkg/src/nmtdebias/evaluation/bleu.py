"""Corpus-level BLEU without smoothing."""
from __future__ import annotations

import json
import math
from collections import Counter
from dataclasses import asdict, dataclass


@dataclass
class BleuReport:
    precisions: list[float]
    brevity_penalty: float
    score: float
    hyp_len: int
    ref_len: int
    matches: list[int]
    totals: list[int]

    def to_json(self) -> str:
        return json.dumps(asdict(self), sort_keys=True)


def _as_tokens(s):
    return s.split() if isinstance(s, str) else list(s)


def _ngrams(tokens, n):
    return Counter(tuple(tokens[k:k + n]) for k in range(len(tokens) - n + 1))


def bleu(hypotheses, references, max_n: int = 4) -> BleuReport:
    """Score ``hypotheses`` against one reference each.

    Clipped n-gram matches and totals are summed over the corpus before
    dividing. Any zero precision gives a score of 0. An order with no
    n-grams on either side (all sentences shorter than n) counts as a
    perfect precision, so ``bleu(h, h) == 100`` for every non-empty ``h``.
    """
    if len(hypotheses) != len(references):
        raise ValueError(f"{len(hypotheses)} hypotheses but {len(references)} references")
    if not hypotheses:
        raise ValueError("empty corpus")
    if max_n < 1:
        raise ValueError("max_n must be >= 1")

    matches, totals, ref_totals = [0] * max_n, [0] * max_n, [0] * max_n
    c = r = 0
    for hyp, ref in zip(hypotheses, references):
        hyp, ref = _as_tokens(hyp), _as_tokens(ref)
        c += len(hyp)
        r += len(ref)
        for n in range(1, max_n + 1):
            h, g = _ngrams(hyp, n), _ngrams(ref, n)
            matches[n - 1] += sum(min(k, g[ng]) for ng, k in h.items())
            totals[n - 1] += max(len(hyp) - n + 1, 0)
            ref_totals[n - 1] += max(len(ref) - n + 1, 0)

    precisions = []
    for m, t, rt in zip(matches, totals, ref_totals):
        if t == 0:
            precisions.append(1.0 if rt == 0 else 0.0)
        else:
            precisions.append(m / t)

    bp = 1.0 if c >= r else (math.exp(1 - r / c) if c > 0 else 0.0)
    if min(precisions) == 0.0:
        score = 0.0
    else:
        score = 100.0 * bp * math.exp(sum(math.log(p) for p in precisions) / max_n)
    return BleuReport(precisions, bp, score, c, r, matches, totals)
