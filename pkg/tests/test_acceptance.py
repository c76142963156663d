"""Acceptance suite: one test per criterion, each printing a PASS/FAIL line.

Run alone with ``pytest tests/test_acceptance.py -s`` or as a script with
``python3 tests/test_acceptance.py``. The lines are also repeated in the
pytest terminal summary.
"""
import filecmp
import json
import sys
import time

import numpy as np
import pytest
import torch

from nmtdebias.cli import main as cli_main
from nmtdebias.corpus import PAD_ID, ParallelCorpus, build_vocab, count_cooccurrences, tokenize
from nmtdebias.debias import direct_bias, hard_debias
from nmtdebias.evaluation import OccupationEntry, analyze_gender, bleu, bundled_occupations, generate_occupations_test
from nmtdebias.glove import GloVe, GNGloVe
from nmtdebias.lexicon import bundled_lexicon
from nmtdebias.nmt import Transformer, TransformerConfig, TrainingConfig, TransformerTranslator, train
from nmtdebias.synthetic import TOY_OCCUPATIONS, gendered_corpus, occupation_parallel_corpus

RESULTS: list[str] = []


def record(n, ok, detail):
    line = f"ACCEPTANCE {n} {'PASS' if ok else 'FAIL'}: {detail}"
    RESULTS.append(line)
    print(line)
    return ok


# 1. debias geometry

def test_ac1_debias_geometry():
    t0 = time.perf_counter()
    corpus = gendered_corpus(n_sentences=5000, seed=11)
    vocab = build_vocab(corpus, 5)
    emb = GloVe(dim=64, seed=0).fit(count_cooccurrences(corpus, vocab, 15), vocab=vocab).embeddings_
    lex = bundled_lexicon("en")
    out, g, report = hard_debias(emb, lex)
    g = g.vector
    neutral = [w for w in lex.neutral_words(out.words)]
    worst_proj = max(abs(out[w] @ g) for w in neutral)
    sample = list(np.random.default_rng(0).choice(neutral, size=20, replace=False))
    skipped = {item for item, _ in report.skipped}
    pairs = [(a, b) for a, b in lex.equalize_pairs if f"{a},{b}" not in skipped]
    worst_norm = worst_mirror = worst_dist = 0.0
    for a, b in pairs:
        worst_norm = max(worst_norm, abs(np.linalg.norm(out[a]) - 1), abs(np.linalg.norm(out[b]) - 1))
        worst_mirror = max(worst_mirror, abs(out[a] @ g + out[b] @ g))
        for w in sample:
            worst_dist = max(worst_dist, abs(np.linalg.norm(out[w] - out[a]) - np.linalg.norm(out[w] - out[b])))
    elapsed = time.perf_counter() - t0
    ok = (len(pairs) > 0 and worst_proj <= 1e-9 and worst_norm <= 1e-6 and worst_mirror <= 1e-6
          and worst_dist <= 1e-6 and elapsed < 10)
    assert record(1, ok, f"max|w.g|={worst_proj:.1e} over {len(neutral)} neutral words; {len(pairs)} pairs: "
                         f"norm err {worst_norm:.1e}, mirror err {worst_mirror:.1e}, "
                         f"equidistance err {worst_dist:.1e}; {elapsed:.1f}s")


# 2. synthetic bias end to end

def test_ac2_synthetic_bias():
    t0 = time.perf_counter()
    corpus = gendered_corpus(n_sentences=20000, seed=0)
    vocab = build_vocab(corpus, 5)
    cooc = count_cooccurrences(corpus, vocab, 15)
    lex = bundled_lexicon("en")
    emb = GloVe(dim=64, seed=0).fit(cooc, vocab=vocab).embeddings_
    out, g, _ = hard_debias(emb, lex)
    words = ["doctor", "nurse"]
    before, after = direct_bias(emb, g, words), direct_bias(out, g, words)
    gn = GNGloVe(lex, dim=64, seed=0).fit(cooc, vocab=vocab)
    gc = gn.embeddings_.gender_coordinate
    coord = max(abs(gn.embeddings_[w][gc]) for w in words)
    elapsed = time.perf_counter() - t0
    ok = before >= 0.15 and after <= 1e-9 and coord <= 0.05 * gn.beta and elapsed < 300
    assert record(2, ok, f"direct bias GloVe={before:.3f} (>=0.15), hard-debiased={after:.1e} (<=1e-9); "
                         f"GN max|v_g|={coord:.4f} (<= {0.05 * gn.beta}); {elapsed:.1f}s")


# 3. translation sanity

@pytest.fixture(scope="module")
def template_corpus():
    src, tgt = occupation_parallel_corpus(bundled_occupations()[:50], seed=0)

    def embed(side):
        v = build_vocab(side, 1)
        return GloVe(dim=64, seed=0).fit(count_cooccurrences(side, v, 15), vocab=v).embeddings_

    return src, tgt, embed(src), embed(tgt)


def _fit(src, tgt, se, te, side, freeze, steps):
    return TransformerTranslator(steps=steps, warmup=200, side=side, freeze=freeze).fit(
        src, tgt, se if side in ("encoder", "both") else None, te if side in ("decoder", "both") else None)


def test_ac3_translation_sanity(template_corpus):
    src, tgt, se, te = template_corpus
    assert len(src) == 200 and len({tuple(s) for s in src}) == 200
    lines, ok = [], True
    for side in ("none", "encoder", "decoder", "both"):
        t0 = time.perf_counter()
        est = _fit(src, tgt, se, te, side, False, 600)
        acc = float(np.mean([p == r for p, r in zip(est.predict(src), tgt)]))
        elapsed = time.perf_counter() - t0
        ok &= acc >= 0.95 and elapsed < 900
        lines.append(f"{side}={acc:.1%} ({elapsed:.0f}s)")
    frozen = _fit(src, tgt, se, te, "both", True, 0)
    snapshot = (frozen.model_.src_embed.weight.detach().clone(), frozen.model_.tgt_embed.weight.detach().clone())
    train(frozen.model_, ParallelCorpus(src, tgt), frozen.src_vocab_, frozen.tgt_vocab_,
          TrainingConfig(steps=50, warmup=200))
    identical = (torch.equal(snapshot[0], frozen.model_.src_embed.weight)
                 and torch.equal(snapshot[1], frozen.model_.tgt_embed.weight))
    ok &= identical
    assert record(3, ok, "exact match " + ", ".join(lines)
                  + f"; frozen tables bit-identical after 50 steps: {identical}")


# 4. bias-harness directionality

def test_ac4_harness_directionality():
    occs = [OccupationEntry(en, m, f) for en, (m, f) in TOY_OCCUPATIONS.items()]
    suite = generate_occupations_test(occs)
    scores = {}
    for policy in ("balanced", "male"):
        src, tgt = occupation_parallel_corpus(occs[:15], friend_policy=policy, repeats=2, seed=1)
        est = TransformerTranslator(steps=400, warmup=200).fit(src, tgt)
        hyp = est.predict([s.split() for s in suite.sources])
        scores[policy] = analyze_gender(hyp, suite).percentage("her", "amiga")
    gap = scores["balanced"] - scores["male"]
    assert record(4, gap >= 10, f"her->amiga balanced={scores['balanced']:.1f}% vs always-amigo="
                                f"{scores['male']:.1f}%, gap {gap:.1f} points (>=10)")


# 5. BLEU oracle table, computed independently with explicit loops over n-grams
# columns: hypothesis, reference, [p1..p4], BP, score

BLEU_ORACLE = [
    ("the cat sat on the mat", "the cat is on the mat",
     [0.8333333333, 0.6, 0.25, 0.0], 1.0, 0.0),
    ("the cat is on the mat", "the cat is on the mat",
     [1.0, 1.0, 1.0, 1.0], 1.0, 100.0),
    ("the the the the the the the", "the cat is on the mat",
     [0.2857142857, 0.0, 0.0, 0.0], 1.0, 0.0),
    ("a b c", "a b c d e f",
     [1.0, 1.0, 1.0, 0.0], 0.3678794412, 0.0),
    ("mi amiga trabaja como contable .", "mi amiga trabaja como contable .",
     [1.0, 1.0, 1.0, 1.0], 1.0, 100.0),
    ("mi amigo trabaja como contable .", "mi amiga trabaja como contable .",
     [0.8333333333, 0.6, 0.5, 0.3333333333], 1.0, 53.7284965912),
    ("la conozco desde hace mucho tiempo , mi amiga trabaja como enfermera .",
     "la conozco desde hace mucho tiempo , mi amiga trabaja como enfermera .",
     [1.0, 1.0, 1.0, 1.0], 1.0, 100.0),
    ("lo conozco desde hace mucho tiempo , mi amigo trabaja como enfermero .",
     "la conozco desde hace mucho tiempo , mi amiga trabaja como enfermera .",
     [0.7692307692, 0.5833333333, 0.4545454545, 0.4], 1.0, 53.4444593479),
    ("conozco a mary desde hace tiempo , mi amiga es médica .",
     "conozco a mary desde hace mucho tiempo , mi amiga trabaja como médica .",
     [0.9166666667, 0.7272727273, 0.5, 0.3333333333], 0.8464817249, 48.8716451730),
    ("it is a guide to action which ensures that the military always obeys the commands of the party",
     "it is a guide to action that ensures that the military will forever heed party commands",
     [0.6666666667, 0.4705882353, 0.375, 0.2666666667], 1.0, 42.0859806952),
    ("it is to insure the troops forever hearing the activity guidebook that party direct",
     "it is a guide to action that ensures that the military will forever heed party commands",
     [0.5, 0.0769230769, 0.0, 0.0], 0.8668778998, 0.0),
    ("a b a b a b", "a b a b",
     [0.6666666667, 0.6, 0.5, 0.3333333333], 1.0, 50.8132748155),
    ("a b c d e f g h", "a b c d x f g h",
     [0.875, 0.7142857143, 0.5, 0.2], 1.0, 50.0),
    ("x y z", "a b c",
     [0.0, 0.0, 0.0, 1.0], 1.0, 0.0),
    ("one two three four five", "one two three four five six seven eight nine ten",
     [1.0, 1.0, 1.0, 1.0], 0.3678794412, 36.7879441171),
    ("the quick brown fox jumps over the lazy dog", "the quick brown dog jumps over the lazy fox",
     [1.0, 0.625, 0.4285714286, 0.1666666667], 1.0, 45.9661357612),
    ("w1 w2 w3 w4 w1 w2 w3 w4", "w1 w2 w3 w4",
     [0.5, 0.4285714286, 0.3333333333, 0.2], 1.0, 34.5720784642),
    ("hello world", "hello world",
     [1.0, 1.0, 1.0, 1.0], 1.0, 100.0),
    ("good morning to you all", "good morning to all of you",
     [1.0, 0.5, 0.3333333333, 0.0], 0.8187307531, 0.0),
    ("el gato está en la alfombra", "el gato se sienta en la alfombra",
     [0.8333333333, 0.6, 0.25, 0.0], 0.8464817249, 0.0),
    ("a a b b c c d d", "a b c d a b c d",
     [1.0, 0.4285714286, 0.0, 0.0], 1.0, 0.0),
    ("i have known her for a long time", "i have known him for a long time",
     [0.875, 0.7142857143, 0.5, 0.2], 1.0, 50.0),
    ("she works as an engineer in the city", "she works in the city as an engineer",
     [1.0, 0.7142857143, 0.3333333333, 0.0], 1.0, 0.0),
    ("p q r s t u v", "p q r s t u v w",
     [1.0, 1.0, 1.0, 1.0], 0.8668778998, 86.6877899750),
    ("m n o p q r s t u v w x", "m n o p q r s t",
     [0.6666666667, 0.6363636364, 0.6, 0.5555555556], 1.0, 61.3229742059),
]
BLEU_CORPUS_ORACLE = ([0.7989949749, 0.6091954023, 0.4697986577, 0.352], 0.9900000838, 52.7319712144)


def test_ac5_bleu_oracle():
    assert len(BLEU_ORACLE) == 25
    worst = 0.0
    for hyp, ref, p, bp, score in BLEU_ORACLE:
        r = bleu([hyp], [ref])
        worst = max([worst, abs(r.brevity_penalty - bp), abs(r.score - score)]
                    + [abs(a - b) for a, b in zip(r.precisions, p)])
    r = bleu([h for h, *_ in BLEU_ORACLE], [ref for _, ref, *_ in BLEU_ORACLE])
    p, bp, score = BLEU_CORPUS_ORACLE
    worst = max([worst, abs(r.brevity_penalty - bp), abs(r.score - score)]
                + [abs(a - b) for a, b in zip(r.precisions, p)])
    identity = all(bleu([h], [h]).score == 100.0 for h, *_ in BLEU_ORACLE) and \
        bleu([h for h, *_ in BLEU_ORACLE], [h for h, *_ in BLEU_ORACLE]).score == 100.0
    assert record(5, worst <= 1e-6 and identity,
                  f"25 pairs + corpus total, max deviation {worst:.1e} (<=1e-6); bleu(h,h)=100 exactly: {identity}")


# 6. occupations generator fidelity

SAMPLE_SENTENCES = [
    ("I've known her for a long time, my friend works as an accounting clerk.",
     "La conozco desde hace mucho tiempo, mi amiga trabaja como contable."),
    ("I've known him for a long time, my friend works as an accounting clerk.",
     "Lo conozco desde hace mucho tiempo, mi amigo trabaja como contable."),
    ("I've known Mary for a long time, my friend works as an accounting clerk.",
     "Conozco a Mary desde hace mucho tiempo, mi amiga trabaja como contable."),
    ("I've known John for a long time, my friend works as an accounting clerk.",
     "Conozco a John desde hace mucho tiempo, mi amigo trabaja como contable."),
]


def test_ac6_occupations_fidelity():
    occs = bundled_occupations()
    clerk = [o for o in occs if o.english == "accounting clerk"]
    suite = generate_occupations_test(clerk)
    raw = [(c.english_text, c.spanish_text) for c in suite] == SAMPLE_SENTENCES
    tok = [(c.english_source, c.spanish_reference) for c in suite] == [
        (" ".join(tokenize(en)), " ".join(tokenize(es))) for en, es in SAMPLE_SENTENCES]
    full = generate_occupations_test(occs)
    card = len(full) == 4 * len(occs)
    assert record(6, raw and tok and card, f"accounting clerk byte match raw={raw} tokenized={tok}; "
                                           f"|suite|={len(full)} = 4 x {len(occs)}: {card}")


# 7. gradient check

def test_ac7_gradient_check():
    torch.manual_seed(0)
    cfg = TransformerConfig(d_model=8, heads=2, layers=1, ff_dim=16, dropout=0.0, max_len=16,
                            label_smoothing=0.1, seed=0)
    model = Transformer(cfg, 12, 12).double().eval()
    gen = torch.Generator().manual_seed(1)
    src = torch.randint(4, 12, (3, 6), generator=gen)
    tgt = torch.randint(4, 12, (3, 6), generator=gen)
    src[0, 4:] = PAD_ID
    tgt[1, 5:] = PAD_ID
    tgt[:, 0] = 2

    def loss():
        return model.loss(src, tgt[:, :-1], tgt[:, 1:])

    model.zero_grad()
    loss().backward()
    params = [(n, p) for n, p in model.named_parameters()]
    rng = np.random.default_rng(2)
    eps, passed, worst = 1e-6, 0, []
    for _ in range(100):
        name, p = params[rng.integers(len(params))]
        idx = tuple(int(rng.integers(s)) for s in p.shape)
        analytic = float(p.grad[idx])
        with torch.no_grad():
            orig = float(p[idx])
            p[idx] = orig + eps
            up = float(loss())
            p[idx] = orig - eps
            down = float(loss())
            p[idx] = orig
        numeric = (up - down) / (2 * eps)
        # relative error, with a small absolute floor so exact zeros compare cleanly
        rel = abs(analytic - numeric) / max(abs(analytic), abs(numeric), 1e-8)
        passed += rel <= 1e-4
        worst.append(rel)
    assert record(7, passed >= 99, f"{passed}/100 sampled parameters within 1e-4 relative error "
                                   f"(median {np.median(worst):.1e}, max {max(worst):.1e})")


# 8. determinism of a full run

def test_ac8_determinism(tmp_path):
    data = tmp_path / "data"
    assert cli_main(["toy-data", "--output", str(data), "--n_sentences", "400"]) == 0
    common = ["--config", str(data / "experiment.cfg"), "--variant", "glove-hard-debiased", "--side", "both",
              "--steps", "150", "--glove_iter", "5", "--min_count", "2", "--d_model", "32"]
    runs = [tmp_path / "run_a", tmp_path / "run_b"]
    for out in runs:
        assert cli_main(["run", *common, "--output", str(out)]) == 0

    def files(root):
        return sorted(p.relative_to(root) for p in root.rglob("*") if p.is_file() and p.name != "manifest.json")

    a, b = runs
    same_tree = files(a) == files(b)
    mismatched = [str(p) for p in files(a) if not filecmp.cmp(a / p, b / p, shallow=False)]
    kinds = {"embeddings": "vectors.txt", "checkpoints": ".nmt", "reports": ".json"}
    covered = {k: sum(str(p).endswith(s) for p in files(a)) for k, s in kinds.items()}
    ma, mb = (json.loads((r / "manifest.json").read_text()) for r in runs)
    stages_equal = [(s["stage"], s["output_hash"]) for s in ma["stages"]] == \
        [(s["stage"], s["output_hash"]) for s in mb["stages"]]
    ok = same_tree and not mismatched and all(covered.values()) and stages_equal
    assert record(8, ok, f"{len(files(a))} files compared ({covered}); mismatches: {mismatched or 'none'}; "
                         f"manifest stage hashes equal: {stages_equal}")


if __name__ == "__main__":
    sys.exit(pytest.main([__file__, "-q", "-s"]))
