"""Generated corpora with controlled gender statistics, for tests and demos."""
from __future__ import annotations

import numpy as np

MALE = {"pron": "he", "obj": "him", "poss": "his", "noun": "man", "kin": "father", "young": "boy",
        "sib": "brother", "child": "son"}
FEMALE = {"pron": "she", "obj": "her", "poss": "her", "noun": "woman", "kin": "mother", "young": "girl",
          "sib": "sister", "child": "daughter"}

_TEMPLATES = [
    "the {occ} said that {pron} would call {poss} {kin} tomorrow .",
    "{pron} is a {occ} and {poss} {sib} is proud of {obj} .",
    "the {noun} works as a {occ} in the city .",
    "my {sib} met the {occ} when {pron} was a {young} .",
    "the {occ} told {poss} {child} about the long day .",
    "yesterday the {occ} saw {poss} {kin} at the market .",
    "that {noun} has been a {occ} for many years .",
    "everyone knows the {occ} because {pron} helps people .",
]
_FILLER = [
    "the weather was cold and the market was busy .",
    "people walk to the city every day .",
    "the long day ended with a quiet evening .",
    "many years ago the city had a small market .",
]


def gendered_corpus(n_sentences=20000, occupations=None, skew=0.9, filler_rate=0.2, seed=0):
    """Sentences where each occupation co-occurs with one gender's words.

    ``occupations`` maps an occupation to the probability its sentence uses
    male context words; the default makes "doctor" and "engineer" male with
    probability ``skew`` and "nurse" and "secretary" female with the same
    probability, with "teacher" and "writer" balanced.
    """
    if occupations is None:
        occupations = {"doctor": skew, "engineer": skew, "nurse": 1 - skew, "secretary": 1 - skew,
                       "teacher": 0.5, "writer": 0.5}
    rng = np.random.default_rng(seed)
    occs = sorted(occupations)
    out = []
    for _ in range(n_sentences):
        if rng.random() < filler_rate:
            out.append(_FILLER[rng.integers(len(_FILLER))].split())
            continue
        occ = occs[rng.integers(len(occs))]
        slots = MALE if rng.random() < occupations[occ] else FEMALE
        tpl = _TEMPLATES[rng.integers(len(_TEMPLATES))]
        out.append(tpl.format(occ=occ, **slots).split())
    return out


# English occupation -> (Spanish masculine, Spanish feminine)
TOY_OCCUPATIONS = {
    "doctor": ("médico", "médica"),
    "nurse": ("enfermero", "enfermera"),
    "teacher": ("profesor", "profesora"),
    "engineer": ("ingeniero", "ingeniera"),
    "lawyer": ("abogado", "abogada"),
    "cook": ("cocinero", "cocinera"),
    "writer": ("escritor", "escritora"),
    "baker": ("panadero", "panadera"),
    "farmer": ("granjero", "granjera"),
    "secretary": ("secretario", "secretaria"),
    "accountant": ("contable", "contable"),
    "architect": ("arquitecto", "arquitecta"),
    "dancer": ("bailarín", "bailarina"),
    "painter": ("pintor", "pintora"),
    "pilot": ("piloto", "piloto"),
    "singer": ("cantante", "cantante"),
    "waiter": ("camarero", "camarera"),
    "librarian": ("bibliotecario", "bibliotecaria"),
    "plumber": ("fontanero", "fontanera"),
    "scientist": ("científico", "científica"),
}

_CONTEXTS = ("her", "him", "female_name", "male_name")


def occupation_parallel_corpus(occupations=None, female_names=("Mary",), male_names=("John",),
                               friend_policy="balanced", repeats=1, seed=0):
    """English/Spanish pairs built on the occupations-test sentence pattern.

    ``friend_policy="balanced"`` translates "friend" following the context
    gender; ``"male"`` always uses "amigo", and the occupation with its
    masculine form, mimicking a corpus where the masculine reading dominates.
    Returns two lists of token lists, shuffled with ``seed``.
    """
    from .evaluation.occupations import OccupationEntry, make_case

    if friend_policy not in ("balanced", "male"):
        raise ValueError("friend_policy must be 'balanced' or 'male'")
    occupations = occupations or TOY_OCCUPATIONS
    if isinstance(occupations, dict):
        occupations = [OccupationEntry(en, m, f) for en, (m, f) in occupations.items()]
    src, tgt = [], []
    for _ in range(repeats):
        for occ in occupations:
            for ctx in _CONTEXTS:
                names = female_names if ctx == "female_name" else male_names
                for name in names if ctx.endswith("name") else (None,):
                    case = make_case(ctx, occ, name or "", name or "")
                    ref = case.spanish_reference
                    if friend_policy == "male" and case.expected_friend == "amiga":
                        ref = make_case(_flip(ctx), occ, name or "", name or "").spanish_reference
                        ref = _keep_object(ref, case.spanish_reference)
                    src.append(case.english_source.split())
                    tgt.append(ref.split())
    rng = np.random.default_rng(seed)
    order = rng.permutation(len(src))
    return [src[k] for k in order], [tgt[k] for k in order]


def _flip(ctx):
    return {"her": "him", "female_name": "male_name"}.get(ctx, ctx)


def _keep_object(male_ref, female_ref):
    # keep the clause that names the person ("La conozco" / "Conozco a Mary"),
    # take the male-gendered remainder ("mi amigo trabaja como ...")
    head = female_ref.split(" , ")[0]
    tail = male_ref.split(" , ", 1)[1]
    return f"{head} , {tail}"


def copy_corpus(n_pairs=50, vocab_size=12, min_len=3, max_len=7, seed=0):
    """Random token sequences paired with themselves."""
    rng = np.random.default_rng(seed)
    words = [f"w{k}" for k in range(vocab_size)]
    seqs = []
    for _ in range(n_pairs):
        n = int(rng.integers(min_len, max_len + 1))
        seqs.append([words[k] for k in rng.integers(vocab_size, size=n)])
    return seqs, [list(s) for s in seqs]
