"""Toy Transformer translator with pre-trained embedding injection."""
from .decoding import beam_search, greedy_decode, translate
from .estimator import TransformerTranslator
from .model import Transformer, TransformerConfig, positional_encoding, scaled_attention
from .training import (
    InjectionSpec,
    TrainingConfig,
    inject_embeddings,
    load_checkpoint,
    save_checkpoint,
    train,
)

__all__ = [
    "beam_search", "greedy_decode", "translate", "TransformerTranslator", "Transformer",
    "TransformerConfig", "positional_encoding", "scaled_attention", "InjectionSpec", "TrainingConfig",
    "inject_embeddings", "load_checkpoint", "save_checkpoint", "train",
]
