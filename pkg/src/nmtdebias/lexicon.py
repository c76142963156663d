"""Gender word sets: definitional pairs, gender-specific words, equalize pairs."""
from __future__ import annotations

from dataclasses import dataclass, field
from importlib import resources
from pathlib import Path
from typing import Iterable

Pair = tuple[str, str]


def read_pairs(path) -> list[Pair]:
    """One ``female,male`` pair per line."""
    pairs = []
    with open(path, encoding="utf-8") as fh:
        for n, line in enumerate(fh, 1):
            line = line.strip()
            if not line or line.startswith("#"):
                continue
            parts = [p.strip() for p in line.split(",")]
            if len(parts) != 2 or not all(parts):
                raise ValueError(f"{path}:{n}: expected 'female,male', got {line!r}")
            pairs.append((parts[0], parts[1]))
    return pairs


def read_words(path) -> list[str]:
    with open(path, encoding="utf-8") as fh:
        return [w.strip() for w in fh if w.strip() and not w.startswith("#")]


@dataclass
class GenderLexicon:
    definitional_pairs: list[Pair]
    gender_specific: set[str] = field(default_factory=set)
    equalize_pairs: list[Pair] = field(default_factory=list)
    language: str = "en"

    def __post_init__(self):
        self.definitional_pairs = [tuple(p) for p in self.definitional_pairs]
        self.equalize_pairs = [tuple(p) for p in self.equalize_pairs]
        self.gender_specific = set(self.gender_specific)
        for a, b in self.definitional_pairs + self.equalize_pairs:
            if a == b:
                raise ValueError(f"pair ({a}, {b}) must contain two distinct words")

    @property
    def pair_words(self) -> set[str]:
        return {w for p in self.definitional_pairs + self.equalize_pairs for w in p}

    @property
    def female_words(self) -> list[str]:
        return _unique(p[0] for p in self.definitional_pairs + self.equalize_pairs)

    @property
    def male_words(self) -> list[str]:
        return _unique(p[1] for p in self.definitional_pairs + self.equalize_pairs)

    def neutral_words(self, vocabulary: Iterable[str]) -> list[str]:
        """Vocabulary words that are neither gender-specific nor in any pair."""
        gendered = self.gender_specific | self.pair_words
        return [w for w in vocabulary if w not in gendered]

    def lowercased(self) -> "GenderLexicon":
        return GenderLexicon(
            [(a.lower(), b.lower()) for a, b in self.definitional_pairs],
            {w.lower() for w in self.gender_specific},
            [(a.lower(), b.lower()) for a, b in self.equalize_pairs],
            self.language,
        )

    @classmethod
    def from_dir(cls, path, language: str | None = None) -> "GenderLexicon":
        """Load ``definitional_pairs.txt``, ``gender_specific.txt`` and ``equalize_pairs.txt``."""
        path = Path(path)
        specific = path / "gender_specific.txt"
        equalize = path / "equalize_pairs.txt"
        return cls(
            read_pairs(path / "definitional_pairs.txt"),
            set(read_words(specific)) if specific.exists() else set(),
            read_pairs(equalize) if equalize.exists() else [],
            language or path.name,
        )


def bundled_lexicon(language: str = "en") -> GenderLexicon:
    """The lexicon shipped with the package (``en`` or ``es``)."""
    root = resources.files("nmtdebias") / "data" / f"lexicon_{language}"
    if not root.is_dir():
        raise ValueError(f"no bundled lexicon for language {language!r}")
    with resources.as_file(root) as p:
        return GenderLexicon.from_dir(p, language)


def _unique(items):
    seen, out = set(), []
    for x in items:
        if x not in seen:
            seen.add(x)
            out.append(x)
    return out
