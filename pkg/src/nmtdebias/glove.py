"""GloVe training and its gender-neutral variant (GN-GloVe).

Both estimators follow the scikit-learn convention: hyperparameters go to
``__init__``, ``fit`` takes a :class:`~nmtdebias.corpus.CoocMatrix` and
learned state ends in a trailing underscore.

The GN objective used here adds, to the mean per-entry GloVe loss,
penalties on the last coordinate ``v_g`` of each exported vector::

    lambda_d * sum_male (v_g - beta)^2
  + lambda_d * sum_female (v_g + beta)^2
  + lambda_e * sum_neutral v_g^2

The original GN-GloVe formulation differs in its details; all three
constants are configurable.
"""
from __future__ import annotations

import logging
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass
from typing import Sequence

import numpy as np
from sklearn.base import BaseEstimator, TransformerMixin
from sklearn.utils.validation import check_is_fitted

from .corpus import SPECIALS, CoocMatrix, Vocabulary
from .embeddings import EmbeddingSet
from .exceptions import DivergenceError
from .lexicon import GenderLexicon

logger = logging.getLogger(__name__)


def glove_weight(x, x_max: float = 10.0, alpha: float = 0.75):
    """GloVe weighting ``(x/x_max)**alpha`` capped at 1."""
    x = np.asarray(x, dtype=np.float64)
    out = np.where(x < x_max, (np.maximum(x, 0.0) / x_max) ** alpha, 1.0)
    return float(out) if out.ndim == 0 else out


def glove_loss(cooc: CoocMatrix, W, Wc, b, bc, x_max=10.0, alpha=0.75) -> float:
    """Total weighted least-squares objective over all stored entries."""
    i, j, x = cooc.rows, cooc.cols, cooc.weights
    diff = np.einsum("nd,nd->n", W[i], Wc[j]) + b[i] + bc[j] - np.log(x)
    return float(np.sum(glove_weight(x, x_max, alpha) * diff**2))


@dataclass
class GloveConfig:
    dim: int = 64
    x_max: float = 10.0
    alpha: float = 0.75
    max_iter: int = 15
    learning_rate: float = 0.05
    seed: int = 0
    batch_size: int = 32
    n_jobs: int = 1

    def __post_init__(self):
        if self.dim < 2:
            raise ValueError("dim must be >= 2")
        if self.x_max <= 0:
            raise ValueError("x_max must be positive")
        if not 0 < self.alpha <= 1:
            raise ValueError("alpha must lie in (0, 1]")
        if self.max_iter < 1:
            raise ValueError("max_iter must be >= 1")
        if self.learning_rate <= 0:
            raise ValueError("learning_rate must be positive")


@dataclass
class GnGloveConfig(GloveConfig):
    lambda_d: float = 1.0
    lambda_e: float = 1.0
    beta: float = 1.0

    def __post_init__(self):
        super().__post_init__()
        if self.lambda_d < 0 or self.lambda_e < 0:
            raise ValueError("lambda_d and lambda_e must be non-negative")
        if self.beta <= 0:
            raise ValueError("beta must be positive")


class GloVe(BaseEstimator, TransformerMixin):
    """Global vectors trained with AdaGrad over shuffled co-occurrence entries.

    Parameters
    ----------
    dim : int
        Vector size.
    x_max, alpha : float
        Weighting function cut-off and exponent.
    max_iter : int
        Number of passes over the co-occurrence entries.
    learning_rate : float
        Initial AdaGrad step size.
    seed : int
        Seeds initialisation and entry shuffling.
    batch_size : int
        Entries per vectorised update; 1 gives the classic per-entry scheme.
    n_jobs : int
        With ``n_jobs > 1`` batches are processed by racing threads on shared
        parameters. Only loss decrease is guaranteed then, not bitwise
        reproducibility.

    Attributes
    ----------
    embeddings_ : EmbeddingSet
        Exported vectors ``w_i + w~_i``.
    loss_trace_ : list of float
        Mean weighted loss per epoch.
    """

    def __init__(self, dim=64, x_max=10.0, alpha=0.75, max_iter=15, learning_rate=0.05,
                 seed=0, batch_size=32, n_jobs=1):
        self.dim = dim
        self.x_max = x_max
        self.alpha = alpha
        self.max_iter = max_iter
        self.learning_rate = learning_rate
        self.seed = seed
        self.batch_size = batch_size
        self.n_jobs = n_jobs

    def _config(self) -> GloveConfig:
        return GloveConfig(self.dim, self.x_max, self.alpha, self.max_iter, self.learning_rate,
                           self.seed, self.batch_size, self.n_jobs)

    def fit(self, X: CoocMatrix, y=None, vocab: Vocabulary | Sequence[str] | None = None):
        cfg = self._config()
        if not isinstance(X, CoocMatrix):
            raise TypeError(f"expected a CoocMatrix, got {type(X).__name__}")
        if len(X) == 0:
            raise ValueError("co-occurrence matrix is empty")
        if np.any(X.weights <= 0):
            raise ValueError("co-occurrence weights must be positive")
        n, d = X.vocab_size, cfg.dim
        words = list(vocab) if vocab is not None else [str(k) for k in range(n)]
        if len(words) != n:
            raise ValueError(f"vocabulary has {len(words)} words, matrix has {n} rows")

        rng = np.random.default_rng(cfg.seed)
        lim = 0.5 / d
        self.W_ = rng.uniform(-lim, lim, (n, d))
        self.Wc_ = rng.uniform(-lim, lim, (n, d))
        self.b_ = rng.uniform(-lim, lim, n)
        self.bc_ = rng.uniform(-lim, lim, n)
        self._G = [np.ones_like(p) for p in (self.W_, self.Wc_, self.b_, self.bc_)]

        logx = np.log(X.weights)
        fx = glove_weight(X.weights, cfg.x_max, cfg.alpha)
        self._prepare_penalty(words)
        self._n_entries = len(X)
        self.loss_trace_ = []
        for epoch in range(1, cfg.max_iter + 1):
            order = rng.permutation(len(X))
            batches = [order[k:k + cfg.batch_size] for k in range(0, len(order), cfg.batch_size)]
            if cfg.n_jobs > 1:
                with ThreadPoolExecutor(cfg.n_jobs) as pool:
                    parts = list(pool.map(
                        lambda bs: sum(self._step(X.rows[o], X.cols[o], logx[o], fx[o]) for o in bs),
                        [batches[k::cfg.n_jobs] for k in range(cfg.n_jobs)],
                    ))
                total = sum(parts)
            else:
                total = 0.0
                for o in batches:
                    total += self._step(X.rows[o], X.cols[o], logx[o], fx[o])
            total += self._penalty_loss()
            loss = total / len(X)
            if not np.isfinite(loss):
                raise DivergenceError(f"epoch {epoch}", loss)
            self.loss_trace_.append(float(loss))
            logger.debug("epoch %d loss %.6f", epoch, loss)

        vectors = self.W_ + self.Wc_
        skip = len(SPECIALS) if isinstance(vocab, Vocabulary) else 0
        self.embeddings_ = EmbeddingSet(words[skip:], vectors[skip:], self._gender_coordinate())
        return self

    def _step(self, i, j, logx, fx) -> float:
        lr = self.learning_rate
        W, Wc, b, bc = self.W_, self.Wc_, self.b_, self.bc_
        GW, GWc, Gb, Gbc = self._G
        diff = np.einsum("nd,nd->n", W[i], Wc[j]) + b[i] + bc[j] - logx
        fdiff = fx * diff
        loss = float(np.dot(fdiff, diff))
        g = 2.0 * fdiff

        ui, inv_i = np.unique(i, return_inverse=True)
        uj, inv_j = np.unique(j, return_inverse=True)
        gW = np.zeros((len(ui), W.shape[1]))
        gWc = np.zeros((len(uj), W.shape[1]))
        np.add.at(gW, inv_i, g[:, None] * Wc[j])
        np.add.at(gWc, inv_j, g[:, None] * W[i])
        gb = np.bincount(inv_i, weights=g, minlength=len(ui))
        gbc = np.bincount(inv_j, weights=g, minlength=len(uj))

        GW[ui] += gW**2
        GWc[uj] += gWc**2
        Gb[ui] += gb**2
        Gbc[uj] += gbc**2
        W[ui] -= lr * gW / np.sqrt(GW[ui])
        Wc[uj] -= lr * gWc / np.sqrt(GWc[uj])
        b[ui] -= lr * gb / np.sqrt(Gb[ui])
        bc[uj] -= lr * gbc / np.sqrt(Gbc[uj])
        self._penalty_step(len(i))
        return loss

    # hooks for the gender-neutral subclass
    def _prepare_penalty(self, words):
        pass

    def _penalty_step(self, batch: int) -> None:
        pass

    def _penalty_loss(self) -> float:
        return 0.0

    def _gender_coordinate(self):
        return None

    def transform(self, X: Sequence[str]) -> np.ndarray:
        """Look up the vectors of ``X`` (a sequence of words)."""
        check_is_fitted(self, "embeddings_")
        emb = self.embeddings_
        missing = [w for w in X if w not in emb]
        if missing:
            raise KeyError(f"words not in vocabulary: {missing[:5]}")
        return np.stack([emb[w] for w in X]) if len(X) else np.zeros((0, emb.dim))


class GNGloVe(GloVe):
    """GloVe with gender information confined to the last coordinate.

    Male seed words are pulled toward ``+beta`` on that coordinate, female
    seeds toward ``-beta``, and neutral words toward 0. Seed sets come from
    the lexicon pairs; neutral words are every other vocabulary word not
    listed as gender-specific. Seeds missing from the vocabulary are skipped
    and counted in ``missing_seed_words_``.

    The penalty is optimised jointly with the co-occurrence loss: every
    minibatch also takes an AdaGrad step on the gender coordinate of the
    seed and neutral words. Because the penalty is weighed against the mean
    per-entry loss, its gradient is scaled by the batch size.
    """

    def __init__(self, lexicon: GenderLexicon | None = None, lambda_d=1.0, lambda_e=1.0, beta=1.0,
                 dim=64, x_max=10.0, alpha=0.75, max_iter=15, learning_rate=0.05,
                 seed=0, batch_size=32, n_jobs=1):
        super().__init__(dim=dim, x_max=x_max, alpha=alpha, max_iter=max_iter,
                         learning_rate=learning_rate, seed=seed, batch_size=batch_size, n_jobs=n_jobs)
        self.lexicon = lexicon
        self.lambda_d = lambda_d
        self.lambda_e = lambda_e
        self.beta = beta

    def _config(self) -> GnGloveConfig:
        return GnGloveConfig(self.dim, self.x_max, self.alpha, self.max_iter, self.learning_rate,
                             self.seed, self.batch_size, self.n_jobs,
                             self.lambda_d, self.lambda_e, self.beta)

    def _prepare_penalty(self, words):
        lex = self.lexicon or GenderLexicon([])
        index = {w: k for k, w in enumerate(words)}
        male = [index[w] for w in lex.male_words if w in index]
        female = [index[w] for w in lex.female_words if w in index]
        specials = set(SPECIALS)
        neutral = [index[w] for w in lex.neutral_words(words) if w not in specials]
        self.missing_seed_words_ = (
            len(lex.male_words) + len(lex.female_words) - len(male) - len(female)
        )
        if self.missing_seed_words_:
            logger.warning("%d gender seed words not in vocabulary", self.missing_seed_words_)
        idx = np.array(male + female + neutral, dtype=np.int64)
        target = np.concatenate([
            np.full(len(male), self.beta), np.full(len(female), -self.beta), np.zeros(len(neutral))
        ])
        weight = np.concatenate([
            np.full(len(male) + len(female), self.lambda_d), np.full(len(neutral), self.lambda_e)
        ])
        self._seed_idx, self._seed_target, self._seed_weight = idx, target, weight

    def _penalty_step(self, batch: int) -> None:
        idx, tgt, lam = self._seed_idx, self._seed_target, self._seed_weight
        if len(idx) == 0:
            return
        g = self.dim - 1
        GW, GWc = self._G[0], self._G[1]
        grad = batch * 2.0 * lam * (self.W_[idx, g] + self.Wc_[idx, g] - tgt)
        GW[idx, g] += grad**2
        GWc[idx, g] += grad**2
        self.W_[idx, g] -= self.learning_rate * grad / np.sqrt(GW[idx, g])
        self.Wc_[idx, g] -= self.learning_rate * grad / np.sqrt(GWc[idx, g])

    def _penalty_loss(self) -> float:
        if len(self._seed_idx) == 0:
            return 0.0
        g = self.dim - 1
        resid = self.W_[self._seed_idx, g] + self.Wc_[self._seed_idx, g] - self._seed_target
        return self._n_entries * float(np.sum(self._seed_weight * resid**2))

    def _gender_coordinate(self):
        return self.dim - 1


def train_glove(cooc: CoocMatrix, config: GloveConfig | None = None, vocab=None) -> GloVe:
    """Fit a :class:`GloVe` estimator from a config dataclass."""
    config = config or GloveConfig()
    return GloVe(**asdict(config)).fit(cooc, vocab=vocab)


def train_gn_glove(cooc: CoocMatrix, lexicon: GenderLexicon, config: GnGloveConfig | None = None,
                   vocab=None) -> GNGloVe:
    config = config or GnGloveConfig()
    return GNGloVe(lexicon=lexicon, **asdict(config)).fit(cooc, vocab=vocab)
