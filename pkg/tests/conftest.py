import sys

import numpy as np
import pytest

from nmtdebias.corpus import build_vocab, count_cooccurrences
from nmtdebias.embeddings import EmbeddingSet
from nmtdebias.lexicon import GenderLexicon
from nmtdebias.synthetic import gendered_corpus


@pytest.fixture(scope="session")
def small_corpus():
    return gendered_corpus(n_sentences=3000, seed=1)


@pytest.fixture(scope="session")
def small_vocab(small_corpus):
    return build_vocab(small_corpus, min_count=5)


@pytest.fixture(scope="session")
def small_cooc(small_corpus, small_vocab):
    return count_cooccurrences(small_corpus, small_vocab, window=5)


@pytest.fixture(scope="session")
def toy_lexicon():
    return GenderLexicon(
        definitional_pairs=[("she", "he"), ("her", "his"), ("woman", "man"), ("mother", "father"),
                            ("girl", "boy"), ("sister", "brother"), ("daughter", "son")],
        gender_specific=["she", "he", "her", "his", "him", "woman", "man", "mother", "father",
                         "girl", "boy", "sister", "brother", "daughter", "son"],
        equalize_pairs=[("woman", "man"), ("mother", "father"), ("girl", "boy"), ("sister", "brother")],
        language="en",
    )


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


def random_embeddings(words, dim, seed=0):
    gen = np.random.default_rng(seed)
    return EmbeddingSet(list(words), gen.normal(size=(len(words), dim)))


def pytest_terminal_summary(terminalreporter):
    mod = sys.modules.get("test_acceptance")
    lines = getattr(mod, "RESULTS", None)
    if lines:
        terminalreporter.section("acceptance criteria")
        for line in lines:
            terminalreporter.write_line(line)
