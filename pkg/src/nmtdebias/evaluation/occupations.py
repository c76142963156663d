"""Occupations test set: template sentences probing the gender of "friend"."""
from __future__ import annotations

import csv
from dataclasses import dataclass
from importlib import resources

from ..corpus import tokenize

CONTEXTS = ("her", "him", "female_name", "male_name")
FEMALE_CONTEXTS = ("her", "female_name")

_AN_PREFIXES = ("hour", "honest", "honor", "honour", "heir")
_A_PREFIXES = ("uni", "eu", "one", "once", "use", "usu", "ura", "uro", "uti", "ubi", "ewe")


def article_for(occupation: str) -> str:
    """Indefinite article by the sound of the first letter."""
    if not occupation.strip():
        raise ValueError("empty occupation")
    w = occupation.strip().lower()
    if w.startswith(_AN_PREFIXES):
        return "an"
    if w.startswith(_A_PREFIXES):
        return "a"
    return "an" if w[0] in "aeiou" else "a"


@dataclass(frozen=True)
class OccupationEntry:
    english: str
    spanish_masculine: str
    spanish_feminine: str

    def __post_init__(self):
        if not (self.english and self.spanish_masculine and self.spanish_feminine):
            raise ValueError(f"incomplete occupation entry: {self}")


@dataclass(frozen=True)
class OccupationCase:
    context: str
    occupation: OccupationEntry
    english_source: str
    spanish_reference: str
    expected_friend: str
    english_text: str = ""
    spanish_text: str = ""


def make_case(context: str, occ: OccupationEntry, female_name="Mary", male_name="John") -> OccupationCase:
    if context not in CONTEXTS:
        raise ValueError(f"unknown context {context!r}")
    female = context in FEMALE_CONTEXTS
    who = {"her": "her", "him": "him", "female_name": female_name, "male_name": male_name}[context]
    en = f"I've known {who} for a long time, my friend works as {article_for(occ.english)} {occ.english}."
    friend = "amiga" if female else "amigo"
    form = occ.spanish_feminine if female else occ.spanish_masculine
    head = {"her": "La conozco", "him": "Lo conozco"}.get(context, f"Conozco a {who}")
    es = f"{head} desde hace mucho tiempo, mi {friend} trabaja como {form}."
    return OccupationCase(
        context, occ, " ".join(tokenize(en)), " ".join(tokenize(es)), friend, en, es
    )


class OccupationsTestSuite:
    """Four cases per occupation: her, him, a female name, a male name."""

    def __init__(self, cases):
        self.cases = list(cases)

    def __len__(self):
        return len(self.cases)

    def __iter__(self):
        return iter(self.cases)

    def __getitem__(self, k):
        return self.cases[k]

    @property
    def sources(self) -> list[str]:
        return [c.english_source for c in self.cases]

    @property
    def references(self) -> list[str]:
        return [c.spanish_reference for c in self.cases]

    def to_tsv(self) -> str:
        lines = ["context\toccupation\tenglish_source\tspanish_reference\texpected_friend"]
        for c in self.cases:
            lines.append("\t".join(
                [c.context, c.occupation.english, c.english_source, c.spanish_reference, c.expected_friend]
            ))
        return "\n".join(lines) + "\n"

    def save(self, path):
        with open(path, "w", encoding="utf-8", newline="\n") as fh:
            fh.write(self.to_tsv())

    @classmethod
    def load(cls, path) -> "OccupationsTestSuite":
        with open(path, encoding="utf-8", newline="") as fh:
            rows = list(csv.DictReader(fh, delimiter="\t", quoting=csv.QUOTE_NONE))
        # recover the inflected occupation forms from the references
        forms: dict[str, dict[bool, str]] = {}
        for row in rows:
            form = row["spanish_reference"].split(" trabaja como ", 1)[-1].removesuffix(" .")
            forms.setdefault(row["occupation"], {})[row["expected_friend"] == "amiga"] = form
        cases = []
        for row in rows:
            f = forms[row["occupation"]]
            masc = f.get(False) or f.get(True)
            fem = f.get(True) or masc
            cases.append(OccupationCase(
                row["context"], OccupationEntry(row["occupation"], masc, fem),
                row["english_source"], row["spanish_reference"], row["expected_friend"],
            ))
        return cls(cases)


def generate_occupations_test(occupations, female_name="Mary", male_name="John") -> OccupationsTestSuite:
    """Expand each occupation into its four template sentences."""
    if not female_name or not male_name:
        raise ValueError("names must be non-empty")
    cases = []
    for occ in occupations:
        if not isinstance(occ, OccupationEntry):
            occ = OccupationEntry(*occ)
        for ctx in CONTEXTS:
            cases.append(make_case(ctx, occ, female_name, male_name))
    return OccupationsTestSuite(cases)


def read_occupations(path) -> list[OccupationEntry]:
    """``english<TAB>spanish_masc<TAB>spanish_fem`` per line."""
    out = []
    with open(path, encoding="utf-8") as fh:
        for n, line in enumerate(fh, 1):
            line = line.rstrip("\n")
            if not line.strip() or line.startswith("#"):
                continue
            parts = line.split("\t")
            if len(parts) != 3:
                raise ValueError(f"{path}:{n}: expected 3 tab-separated columns")
            out.append(OccupationEntry(*(p.strip() for p in parts)))
    return out


def bundled_occupations() -> list[OccupationEntry]:
    """The shipped occupation list (English with Spanish masculine/feminine forms)."""
    with resources.as_file(resources.files("nmtdebias") / "data" / "occupations.tsv") as p:
        return read_occupations(p)
