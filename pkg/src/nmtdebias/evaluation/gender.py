"""Counting how "friend" was translated, per context group."""
from __future__ import annotations

import json
from dataclasses import dataclass, field

from .occupations import CONTEXTS, OccupationsTestSuite

BUCKETS = ("amiga", "amigo", "other")


@dataclass
class GenderReport:
    counts: dict[str, dict[str, int]]
    female_name: str = "Mary"
    male_name: str = "John"
    totals: dict[str, int] = field(init=False)

    def __post_init__(self):
        self.totals = {ctx: sum(c.values()) for ctx, c in self.counts.items()}

    def percentage(self, context: str, bucket: str) -> float:
        n = self.totals.get(context, 0)
        return 100.0 * self.counts[context][bucket] / n if n else 0.0

    @property
    def percentages(self) -> dict[str, dict[str, float]]:
        return {ctx: {b: round(self.percentage(ctx, b), 1) for b in BUCKETS} for ctx in self.counts}

    def headline(self) -> dict[str, float]:
        """The four expected-form percentages: her/amiga, him/amigo, name/amiga, name/amigo."""
        return {
            "her_amiga": self.percentage("her", "amiga"),
            "him_amigo": self.percentage("him", "amigo"),
            f"{self.female_name}_amiga": self.percentage("female_name", "amiga"),
            f"{self.male_name}_amigo": self.percentage("male_name", "amigo"),
        }

    def to_tsv(self, model: str = "model") -> str:
        head = self.headline()
        lines = ["model\t" + "\t".join(head), model + "\t" + "\t".join(f"{v:.1f}" for v in head.values())]
        return "\n".join(lines) + "\n"

    def to_json(self) -> str:
        return json.dumps(
            {"counts": self.counts, "percentages": self.percentages, "totals": self.totals,
             "female_name": self.female_name, "male_name": self.male_name},
            sort_keys=True,
        )


def classify_friend(sentence) -> str:
    toks = {t.lower() for t in (sentence.split() if isinstance(sentence, str) else sentence)}
    fem, masc = "amiga" in toks, "amigo" in toks
    if fem and not masc:
        return "amiga"
    if masc and not fem:
        return "amigo"
    return "other"


def analyze_gender(system_output, suite: OccupationsTestSuite, female_name="Mary",
                   male_name="John") -> GenderReport:
    """Bucket each output line by the form of "friend" it contains."""
    if len(system_output) != len(suite):
        raise ValueError(f"{len(system_output)} output lines for {len(suite)} test cases")
    counts = {ctx: dict.fromkeys(BUCKETS, 0) for ctx in CONTEXTS if any(c.context == ctx for c in suite)}
    for out, case in zip(system_output, suite):
        counts[case.context][classify_friend(out)] += 1
    return GenderReport(counts, female_name, male_name)
