"""scikit-learn style wrapper around the Transformer translator."""
from __future__ import annotations

from sklearn.base import BaseEstimator
from sklearn.utils.validation import check_is_fitted

from ..corpus import ParallelCorpus, Vocabulary, build_vocab
from ..embeddings import EmbeddingSet
from ..evaluation.bleu import bleu
from .decoding import translate
from .model import Transformer, TransformerConfig
from .training import InjectionSpec, TrainingConfig, inject_embeddings, load_checkpoint, save_checkpoint, train
from ..validation import check_embeddings, check_sentences


class TransformerTranslator(BaseEstimator):
    """Sequence-to-sequence translator: ``fit(source, target)``, ``predict(source)``.

    ``X`` and ``y`` are sequences of token lists (or whitespace-tokenized
    strings). Pre-trained vectors for the sides named by ``side`` are passed
    to ``fit``.

    Attributes
    ----------
    model_ : Transformer
    src_vocab_, tgt_vocab_ : Vocabulary
    loss_trace_ : list of float
    injection_ : InjectionReport
    """

    def __init__(self, d_model=64, heads=4, layers=2, ff_dim=256, dropout=0.1, max_len=64,
                 label_smoothing=0.1, seed=0, steps=2000, batch_size=32, lr_factor=2.0, warmup=400,
                 side="none", freeze=False, beam=1, min_count=1, checkpoint_every=0, checkpoint_dir=None):
        self.d_model = d_model
        self.heads = heads
        self.layers = layers
        self.ff_dim = ff_dim
        self.dropout = dropout
        self.max_len = max_len
        self.label_smoothing = label_smoothing
        self.seed = seed
        self.steps = steps
        self.batch_size = batch_size
        self.lr_factor = lr_factor
        self.warmup = warmup
        self.side = side
        self.freeze = freeze
        self.beam = beam
        self.min_count = min_count
        self.checkpoint_every = checkpoint_every
        self.checkpoint_dir = checkpoint_dir

    def _model_config(self):
        return TransformerConfig(self.d_model, self.heads, self.layers, self.ff_dim, self.dropout,
                                 self.max_len, self.label_smoothing, self.seed)

    def fit(self, X, y, source_embeddings: EmbeddingSet | None = None,
            target_embeddings: EmbeddingSet | None = None):
        corpus = ParallelCorpus(check_sentences(X), check_sentences(y, "y"))
        if source_embeddings is not None:
            check_embeddings(source_embeddings, self.d_model, "source_embeddings")
        if target_embeddings is not None:
            check_embeddings(target_embeddings, self.d_model, "target_embeddings")
        spec = InjectionSpec(self.side, self.freeze, source_embeddings, target_embeddings)
        self.src_vocab_ = build_vocab(corpus.source, self.min_count)
        self.tgt_vocab_ = build_vocab(corpus.target, self.min_count)
        self.model_ = Transformer(self._model_config(), len(self.src_vocab_), len(self.tgt_vocab_))
        self.injection_ = inject_embeddings(self.model_, spec, self.src_vocab_, self.tgt_vocab_)
        self.loss_trace_ = train(
            self.model_, corpus, self.src_vocab_, self.tgt_vocab_,
            TrainingConfig(self.steps, self.batch_size, self.lr_factor, self.warmup,
                           self.checkpoint_every, self.checkpoint_dir),
        )
        return self

    def predict(self, X) -> list[list[str]]:
        check_is_fitted(self, "model_")
        return [translate(self.model_, s, self.src_vocab_, self.tgt_vocab_, self.beam) for s in check_sentences(X)]

    def score(self, X, y) -> float:
        """Corpus BLEU of the predictions against ``y``."""
        return bleu(self.predict(X), check_sentences(y)).score

    def save(self, path) -> None:
        check_is_fitted(self, "model_")
        save_checkpoint(self.model_, path, self.src_vocab_, self.tgt_vocab_)

    @classmethod
    def load(cls, path, **params) -> "TransformerTranslator":
        model, src_vocab, tgt_vocab = load_checkpoint(path)
        cfg = model.cfg
        est = cls(d_model=cfg.d_model, heads=cfg.heads, layers=cfg.layers, ff_dim=cfg.ff_dim,
                  dropout=cfg.dropout, max_len=cfg.max_len, label_smoothing=cfg.label_smoothing,
                  seed=cfg.seed, **params)
        est.model_, est.src_vocab_, est.tgt_vocab_ = model, src_vocab, tgt_vocab
        return est
