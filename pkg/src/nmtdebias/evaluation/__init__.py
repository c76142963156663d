"""BLEU scoring and the occupations gender-bias harness."""
from .bleu import BleuReport, bleu
from .gender import GenderReport, analyze_gender, classify_friend
from .occupations import (
    OccupationCase,
    OccupationEntry,
    OccupationsTestSuite,
    article_for,
    bundled_occupations,
    generate_occupations_test,
    read_occupations,
)

__all__ = [
    "BleuReport", "bleu", "GenderReport", "analyze_gender", "classify_friend", "OccupationCase",
    "OccupationEntry", "OccupationsTestSuite", "article_for", "bundled_occupations",
    "generate_occupations_test", "read_occupations",
]
