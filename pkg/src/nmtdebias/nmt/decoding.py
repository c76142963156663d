"""Greedy and beam-search decoding."""
from __future__ import annotations

import numpy as np
import torch

from ..corpus import BOS_ID, EOS_ID, Vocabulary
from .model import Transformer
from .training import encode_batch


def _log_probs(model, tgt_prefix, memory, pad) -> np.ndarray:
    logits = model.decode(tgt_prefix, memory, pad)[:, -1]
    return torch.log_softmax(logits.double(), dim=-1).numpy()


@torch.no_grad()
def greedy_decode(model: Transformer, src_ids: torch.Tensor, max_steps: int) -> list[int]:
    memory, pad = model.encode(src_ids)
    out = [BOS_ID]
    for _ in range(max_steps):
        lp = _log_probs(model, torch.tensor([out]), memory, pad)[0]
        tok = int(np.argmax(lp))  # first maximum: lowest index wins ties
        if tok == EOS_ID:
            break
        out.append(tok)
    return out[1:]


@torch.no_grad()
def beam_search(model: Transformer, src_ids: torch.Tensor, beam: int, max_steps: int) -> list[int]:
    """Length-normalised beam search.

    Candidates are ranked by cumulative log-probability, ties going to the
    lower token index; finished hypotheses are compared by log-probability
    per generated token (end-of-sentence included).
    """
    memory, pad = model.encode(src_ids)
    alive = [([BOS_ID], 0.0)]
    finished = []
    for _ in range(max_steps):
        if not alive:
            break
        prefixes = torch.tensor([seq for seq, _ in alive])
        lp = _log_probs(model, prefixes, memory.expand(len(alive), -1, -1), pad.expand(len(alive), -1, -1))
        scores = np.array([s for _, s in alive])[:, None] + lp
        flat = scores.ravel()
        # stable sort on the negated score keeps (hyp, token) index order on ties
        top = np.argsort(-flat, kind="stable")[:beam - len(finished)]
        nxt = []
        for k in top:
            h, tok = divmod(int(k), lp.shape[1])
            seq = alive[h][0] + [tok]
            if tok == EOS_ID:
                finished.append((seq, float(flat[k])))
            else:
                nxt.append((seq, float(flat[k])))
        alive = nxt
        if len(finished) >= beam:
            break
    finished.extend(alive)

    def norm(item):
        seq, score = item
        return score / max(len(seq) - 1, 1)

    best = max(finished, key=norm)[0][1:]
    return best[:-1] if best and best[-1] == EOS_ID else best


def translate(model: Transformer, sentence, src_vocab: Vocabulary, tgt_vocab: Vocabulary,
              beam: int = 1) -> list[str]:
    """Translate one tokenized sentence. ``beam=1`` is greedy decoding."""
    if beam < 1:
        raise ValueError("beam must be >= 1")
    if not sentence:
        return []
    model.eval()
    # the source also carries an end-of-sentence token
    src = encode_batch([list(sentence)[:model.cfg.max_len - 1]], src_vocab)
    max_steps = model.cfg.max_len - 1
    ids = greedy_decode(model, src, max_steps) if beam == 1 else beam_search(model, src, beam, max_steps)
    return tgt_vocab.decode(ids)
