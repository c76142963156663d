import math

import numpy as np
import pytest
import torch
from hypothesis import given, settings
from hypothesis import strategies as st
from sklearn.base import clone

from nmtdebias.corpus import EOS_ID, PAD_ID, ParallelCorpus, build_vocab
from nmtdebias.embeddings import EmbeddingSet
from nmtdebias.exceptions import DivergenceError
from nmtdebias.nmt import (
    InjectionSpec, TrainingConfig, Transformer, TransformerConfig, TransformerTranslator, beam_search,
    greedy_decode, inject_embeddings, load_checkpoint, positional_encoding, save_checkpoint, scaled_attention,
    train, translate,
)
from nmtdebias.nmt.training import encode_batch, noam_rate
from nmtdebias.synthetic import copy_corpus

TINY = dict(d_model=16, heads=2, layers=1, ff_dim=32, dropout=0.0, max_len=16)


def tiny_model(src=10, tgt=10, **kw):
    return Transformer(TransformerConfig(**{**TINY, **kw}), src, tgt)


def state_equal(a, b):
    sa, sb = a.state_dict(), b.state_dict()
    return sa.keys() == sb.keys() and all(torch.equal(sa[k], sb[k]) for k in sa)


# positional encoding

def test_positional_encoding_position_zero():
    pe = positional_encoding(0, 8)
    assert np.array_equal(pe[0::2], np.zeros(4)) and np.array_equal(pe[1::2], np.ones(4))


def test_positional_encoding_first_index_is_sin():
    for pos in (1, 5, 17):
        assert positional_encoding(pos, 6)[0] == pytest.approx(math.sin(pos))


def test_positional_encoding_d4():
    assert np.allclose(positional_encoding(1, 4), [0.84147, 0.54030, 0.0100, 0.99995], atol=1e-5)


@given(st.integers(0, 500), st.integers(1, 64))
def test_positional_encoding_bounded(pos, d):
    pe = positional_encoding(pos, d)
    assert pe.shape == (d,) and np.all(np.abs(pe) <= 1.0)


# attention

def test_attention_single_position_returns_value():
    V = torch.tensor([[[0.3, -1.2, 2.0]]])
    out = scaled_attention(torch.randn(1, 1, 3), torch.randn(1, 1, 3), V)
    assert torch.allclose(out, V)


def test_attention_identical_keys_uniform():
    K = torch.ones(1, 5, 4)
    _, w = scaled_attention(torch.randn(1, 3, 4), K, torch.randn(1, 5, 4), return_weights=True)
    assert torch.allclose(w, torch.full((1, 3, 5), 0.2))


def test_attention_ln3_example():
    d = 4
    Q = torch.tensor([[[math.sqrt(d), 0.0, 0.0, 0.0]]], dtype=torch.float64)
    K = torch.tensor([[[0.0, 0, 0, 0], [math.log(3), 0, 0, 0]]], dtype=torch.float64)
    V = torch.tensor([[[1.0, 0, 0, 0], [0.0, 1, 0, 0]]], dtype=torch.float64)
    out, w = scaled_attention(Q, K, V, return_weights=True)
    assert torch.allclose(w, torch.tensor([[[0.25, 0.75]]], dtype=torch.float64))
    assert torch.allclose(out[0, 0, :2], torch.tensor([0.25, 0.75], dtype=torch.float64))


def test_attention_mask_and_empty_row():
    Q, K, V = torch.randn(1, 2, 4), torch.randn(1, 3, 4), torch.randn(1, 3, 4)
    mask = torch.tensor([[[False, True, True], [False, False, True]]])
    _, w = scaled_attention(Q, K, V, mask, return_weights=True)
    assert w[0, 0, 0] == 1.0 and torch.all(w[0, :, 2] == 0)
    with pytest.raises(ValueError, match="empty attention row"):
        scaled_attention(Q, K, V, torch.tensor([[[True, True, True], [False, False, False]]]))


@settings(max_examples=20, deadline=None)
@given(st.integers(0, 10_000))
def test_attention_rows_sum_to_one_all_layers(seed):
    gen = torch.Generator().manual_seed(seed)
    m = tiny_model(layers=2).eval()
    src = torch.randint(4, 10, (2, 6), generator=gen)
    src[0, 4:] = PAD_ID
    tgt = torch.randint(4, 10, (2, 5), generator=gen)
    with torch.no_grad():
        m(src, tgt)
    blocks = [l.attn for l in m.encoder] + [a for l in m.decoder for a in (l.self_attn, l.cross_attn)]
    assert len(blocks) == 6
    for blk in blocks:
        assert torch.allclose(blk.last_weights.sum(-1), torch.ones(()), atol=1e-6)


# structure

def test_config_validation():
    with pytest.raises(ValueError):
        TransformerConfig(d_model=10, heads=4)
    with pytest.raises(ValueError):
        TransformerConfig(layers=0)
    with pytest.raises(ValueError):
        TransformerConfig(dropout=1.0)


def test_padding_rows_are_zero_and_seeded_init():
    a, b = tiny_model(seed=3), tiny_model(seed=3)
    assert state_equal(a, b)
    assert torch.all(a.src_embed.weight[PAD_ID] == 0) and torch.all(a.tgt_embed.weight[PAD_ID] == 0)
    assert not state_equal(a, tiny_model(seed=4))


def test_causality():
    m = tiny_model().eval()
    src = torch.tensor([[4, 5, 6, EOS_ID]])
    tgt = torch.tensor([[2, 4, 5, 6, 7, 8]])
    with torch.no_grad():
        base = m(src, tgt)
        for t in range(1, tgt.shape[1]):
            changed = tgt.clone()
            changed[0, t] = 9 if tgt[0, t] != 9 else 4
            out = m(src, changed)
            assert torch.equal(out[:, :t], base[:, :t])
            assert not torch.allclose(out[:, t:], base[:, t:])


def test_padding_does_not_change_outputs():
    m = tiny_model().eval()
    src = torch.tensor([[4, 5, 6, EOS_ID]])
    padded = torch.tensor([[4, 5, 6, EOS_ID, PAD_ID, PAD_ID, PAD_ID]])
    tgt = torch.tensor([[2, 7, 8]])
    with torch.no_grad():
        mem, _ = m.encode(src)
        mem_p, _ = m.encode(padded)
        assert torch.allclose(mem, mem_p[:, :4], atol=1e-6)
        assert torch.allclose(m(src, tgt), m(padded, tgt), atol=1e-6)


def test_max_len_enforced():
    m = tiny_model(max_len=4)
    with pytest.raises(ValueError):
        m.encode(torch.full((1, 5), 4))


# injection

def _vocabs():
    src = build_vocab([["a", "b", "c", "d"]], 1)
    tgt = build_vocab([["w", "x", "y", "z"]], 1)
    return src, tgt


def test_inject_none_is_noop():
    sv, tv = _vocabs()
    m, ref = tiny_model(8, 8), tiny_model(8, 8)
    inject_embeddings(m, InjectionSpec("none"), sv, tv)
    assert state_equal(m, ref)


def test_inject_encoder_rows():
    sv, tv = _vocabs()
    emb = EmbeddingSet(["a", "b", "c", "d"], np.arange(64, dtype=float).reshape(4, 16) / 10)
    m, ref = tiny_model(8, 8), tiny_model(8, 8)
    report = inject_embeddings(m, InjectionSpec("encoder", source_embeddings=emb), sv, tv)
    for w in emb.words:
        assert torch.allclose(m.src_embed.weight[sv.index[w]], torch.tensor(emb[w], dtype=torch.float32))
    assert torch.equal(m.tgt_embed.weight, ref.tgt_embed.weight)
    assert torch.equal(m.src_embed.weight[:4], ref.src_embed.weight[:4])
    assert report.covered == {"encoder": 4} and report.fallback == {"encoder": 0}


def test_inject_partial_coverage_counts_fallback():
    sv, tv = _vocabs()
    emb = EmbeddingSet(["w", "q"], np.ones((2, 16)))
    m, ref = tiny_model(8, 8), tiny_model(8, 8)
    report = inject_embeddings(m, InjectionSpec("decoder", target_embeddings=emb), sv, tv)
    assert report.covered["decoder"] == 1 and report.fallback["decoder"] == 3
    assert torch.equal(m.tgt_embed.weight[tv.index["x"]], ref.tgt_embed.weight[tv.index["x"]])


def test_inject_dimension_mismatch():
    sv, tv = _vocabs()
    emb = EmbeddingSet(["a"], np.ones((1, 5)))
    with pytest.raises(ValueError, match="expected dim 16, got 5"):
        inject_embeddings(tiny_model(8, 8), InjectionSpec("encoder", source_embeddings=emb), sv, tv)


def test_injection_spec_validation():
    emb = EmbeddingSet(["a"], np.ones((1, 16)))
    with pytest.raises(ValueError):
        InjectionSpec("encoder")
    with pytest.raises(ValueError):
        InjectionSpec("none", source_embeddings=emb)
    with pytest.raises(ValueError):
        InjectionSpec("both", source_embeddings=emb)
    with pytest.raises(ValueError):
        InjectionSpec("sideways")


@pytest.mark.parametrize("freeze", [True, False])
def test_freeze_keeps_tables_bit_identical(freeze):
    src, tgt = copy_corpus(20, vocab_size=8, seed=1)
    corpus = ParallelCorpus(src, tgt)
    sv, tv = build_vocab(src, 1), build_vocab(tgt, 1)
    gen = np.random.default_rng(0)
    se = EmbeddingSet(sv.words, gen.normal(size=(len(sv.words), 16)))
    te = EmbeddingSet(tv.words, gen.normal(size=(len(tv.words), 16)))
    m = Transformer(TransformerConfig(**TINY), len(sv), len(tv))
    inject_embeddings(m, InjectionSpec("both", freeze, se, te), sv, tv)
    before = (m.src_embed.weight.detach().clone(), m.tgt_embed.weight.detach().clone())
    other = m.out.weight.detach().clone()
    train(m, corpus, sv, tv, TrainingConfig(steps=10, batch_size=8, warmup=5))
    same = torch.equal(before[0], m.src_embed.weight) and torch.equal(before[1], m.tgt_embed.weight)
    assert same is freeze
    assert not torch.equal(other, m.out.weight)
    assert m.frozen == ({"encoder", "decoder"} if freeze else set())


# training

@pytest.fixture(scope="module")
def copy_data():
    src, tgt = copy_corpus(50, vocab_size=12, seed=0)
    return src, tgt


def test_zero_steps_leaves_initialisation(copy_data):
    src, tgt = copy_data
    sv, tv = build_vocab(src, 1), build_vocab(tgt, 1)
    m = Transformer(TransformerConfig(**TINY), len(sv), len(tv))
    ref = Transformer(TransformerConfig(**TINY), len(sv), len(tv))
    assert train(m, ParallelCorpus(src, tgt), sv, tv, TrainingConfig(steps=0)) == []
    assert state_equal(m, ref)


def test_same_seed_same_trace(copy_data):
    src, tgt = copy_data
    kw = dict(**{**TINY, "dropout": 0.1}, steps=15, batch_size=10, warmup=5)
    a = TransformerTranslator(**kw).fit(src, tgt)
    b = TransformerTranslator(**kw).fit(src, tgt)
    assert a.loss_trace_ == b.loss_trace_
    assert state_equal(a.model_, b.model_)


def test_training_rejects_long_sentences_and_empty():
    sv = build_vocab([["a"]], 1)
    m = tiny_model(len(sv), len(sv), max_len=4)
    with pytest.raises(ValueError):
        train(m, ParallelCorpus([["a"] * 4], [["a"]]), sv, sv, TrainingConfig(steps=1))
    with pytest.raises(ValueError):
        train(m, ParallelCorpus([], []), sv, sv, TrainingConfig(steps=1))
    with pytest.raises(ValueError):
        TrainingConfig(batch_size=0)


def test_divergence_names_step(copy_data, monkeypatch):
    src, tgt = copy_data
    sv, tv = build_vocab(src, 1), build_vocab(tgt, 1)
    m = Transformer(TransformerConfig(**TINY), len(sv), len(tv))
    real = Transformer.loss
    calls = {"n": 0}

    def flaky(self, *a):
        calls["n"] += 1
        out = real(self, *a)
        return out * float("nan") if calls["n"] == 3 else out

    monkeypatch.setattr(Transformer, "loss", flaky)
    with pytest.raises(DivergenceError, match="divergence at step 3"):
        train(m, ParallelCorpus(src, tgt), sv, tv, TrainingConfig(steps=5, batch_size=10))


def test_noam_rate_shape():
    assert noam_rate(0, 64, 400, 2.0) == noam_rate(1, 64, 400, 2.0)
    peak = noam_rate(400, 64, 400, 2.0)
    assert noam_rate(200, 64, 400, 2.0) < peak and noam_rate(800, 64, 400, 2.0) < peak
    assert peak == pytest.approx(2.0 / 8 / 20)


def test_encode_batch_layout():
    v = build_vocab([["a", "b"]], 1)
    out = encode_batch([["a"], ["a", "b", "zz"]], v, bos=True)
    assert out.tolist() == [[2, 4, 3, 1, 1], [2, 4, 5, 0, 3]]


def test_checkpoints_every_k_steps(tmp_path, copy_data):
    src, tgt = copy_data
    est = TransformerTranslator(**TINY, steps=6, batch_size=10, checkpoint_every=2,
                                checkpoint_dir=str(tmp_path / "ck")).fit(src, tgt)
    names = sorted(p.name for p in (tmp_path / "ck").iterdir())
    assert names == ["step000002.nmt", "step000004.nmt", "step000006.nmt"]
    m, _, _ = load_checkpoint(tmp_path / "ck" / "step000006.nmt")
    assert state_equal(m, est.model_) and m.step == 6


# copy task and decoding

@pytest.fixture(scope="module")
def copy_model(copy_data):
    src, tgt = copy_data
    return TransformerTranslator(d_model=32, heads=4, layers=2, ff_dim=64, dropout=0.0, steps=400,
                                 batch_size=25, warmup=100, label_smoothing=0.0).fit(src, tgt)


def test_copy_task_exact_match(copy_model, copy_data):
    src, _ = copy_data
    pred = copy_model.predict(src)
    acc = np.mean([p == s for p, s in zip(pred, src)])
    assert acc >= 0.95


def test_beam_one_equals_greedy(copy_model, copy_data):
    m, sv = copy_model.model_, copy_model.src_vocab_
    for s in copy_data[0][:10]:
        ids = encode_batch([s], sv)
        assert greedy_decode(m, ids, 15) == beam_search(m, ids, 1, 15)


def test_wide_beam_still_copies(copy_model, copy_data):
    src = copy_data[0][:10]
    out = [translate(copy_model.model_, s, copy_model.src_vocab_, copy_model.tgt_vocab_, beam=4) for s in src]
    assert np.mean([o == s for o, s in zip(out, src)]) >= 0.9


def test_forced_eos_gives_empty_translation():
    sv = build_vocab([["a", "b"]], 1)
    m = tiny_model(len(sv), len(sv)).eval()
    with torch.no_grad():
        m.out.weight.zero_()
        m.out.bias.zero_()
        m.out.bias[EOS_ID] = 10.0
    assert translate(m, ["a", "b"], sv, sv) == []
    assert translate(m, ["a", "b"], sv, sv, beam=3) == []
    assert translate(m, [], sv, sv) == []
    with pytest.raises(ValueError):
        translate(m, ["a"], sv, sv, beam=0)


def test_decoding_is_capped_by_max_len():
    sv = build_vocab([["a", "b"]], 1)
    m = tiny_model(len(sv), len(sv), max_len=6).eval()
    with torch.no_grad():
        m.out.weight.zero_()
        m.out.bias.zero_()
        m.out.bias[sv.index["a"]] = 10.0
    assert translate(m, ["b"] * 20, sv, sv) == ["a"] * 5


# persistence and estimator API

def test_checkpoint_round_trip(tmp_path, copy_model, copy_data):
    path = tmp_path / "m.nmt"
    copy_model.save(path)
    raw = path.read_bytes()
    assert raw[:4] == b"NMT1"
    loaded = TransformerTranslator.load(path)
    assert state_equal(loaded.model_, copy_model.model_)
    assert loaded.src_vocab_ == copy_model.src_vocab_ or loaded.src_vocab_.tokens == copy_model.src_vocab_.tokens
    assert loaded.predict(copy_data[0][:5]) == copy_model.predict(copy_data[0][:5])
    save_checkpoint(loaded.model_, tmp_path / "again.nmt", loaded.src_vocab_, loaded.tgt_vocab_)
    assert (tmp_path / "again.nmt").read_bytes() == raw


def test_checkpoint_keeps_frozen_sides(tmp_path):
    sv = build_vocab([["a"]], 1)
    m = tiny_model(len(sv), len(sv))
    m.freeze("decoder")
    save_checkpoint(m, tmp_path / "f.nmt", sv, sv)
    back, _, _ = load_checkpoint(tmp_path / "f.nmt")
    assert back.frozen == {"decoder"} and not back.tgt_embed.weight.requires_grad


def test_checkpoint_bad_magic(tmp_path):
    (tmp_path / "x.nmt").write_bytes(b"XXXX\0\0\0\0")
    with pytest.raises(ValueError):
        load_checkpoint(tmp_path / "x.nmt")


def test_estimator_api(copy_model, copy_data):
    params = copy_model.get_params()
    assert params["d_model"] == 32 and params["side"] == "none"
    assert clone(copy_model).get_params() == params
    src = copy_data[0]
    assert copy_model.score(src[:10], src[:10]) >= 90.0
    assert copy_model.predict([" ".join(src[0])]) == [src[0]]
    with pytest.raises(TypeError):
        copy_model.predict("w1 w2")
