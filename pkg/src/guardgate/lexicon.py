"""Deterministic keyword-lexicon classifier.

Stands in for the fine-tuned model so the serving, benchmarking, and
evaluation stack runs without a GPU. Matching is case-insensitive on word
boundaries with punctuation stripped (mirroring the robustness the real
model needed against capitalization/punctuation noise); each matched
pattern contributes its weight once per attribute, saturating at 1.0.
"""

from __future__ import annotations

import csv
import re
from dataclasses import dataclass, field
from pathlib import Path

from .codec import (
    ATTRIBUTE_NAMES,
    FLAG_APPROPRIATE,
    FLAG_INAPPROPRIATE,
    AttributeScores,
    Verdict,
    _round_tenth,
)

_NORM_RE = re.compile(r"[a-z0-9']+")


def _normalize(text: str) -> tuple[str, ...]:
    return tuple(_NORM_RE.findall(text.lower()))


@dataclass(frozen=True)
class LexiconEntry:
    pattern: str
    attribute: str
    weight: float

    def __post_init__(self) -> None:
        if not self.pattern.strip():
            raise ValueError("pattern must be non-empty")
        if self.attribute not in ATTRIBUTE_NAMES:
            raise ValueError(f"unknown attribute {self.attribute!r}")
        if not 0 < self.weight <= 1:
            raise ValueError(f"weight must be in (0,1], got {self.weight}")


@dataclass(frozen=True)
class Lexicon:
    """Immutable pattern table; safe for unrestricted concurrent use."""

    entries: tuple[LexiconEntry, ...]
    _tokenized: tuple[tuple[tuple[str, ...], str, float], ...] = field(
        init=False, repr=False, compare=False, default=()
    )

    def __post_init__(self) -> None:
        tokenized = tuple(
            (_normalize(e.pattern), e.attribute, e.weight) for e in self.entries
        )
        for toks, _, _ in tokenized:
            if not toks:
                raise ValueError("pattern normalizes to nothing")
        object.__setattr__(self, "_tokenized", tokenized)

    @classmethod
    def from_pairs(cls, pairs: list[tuple[str, str, float]]) -> "Lexicon":
        return cls(entries=tuple(LexiconEntry(p, a, w) for p, a, w in pairs))

    @classmethod
    def load_csv(cls, path: str | Path) -> "Lexicon":
        """Load from a UTF-8 CSV with header ``pattern,attribute,weight``."""
        entries = []
        with open(path, newline="", encoding="utf-8") as fh:
            reader = csv.DictReader(fh)
            missing = {"pattern", "attribute", "weight"} - set(reader.fieldnames or ())
            if missing:
                raise ValueError(f"lexicon CSV missing columns: {sorted(missing)}")
            for row in reader:
                entries.append(
                    LexiconEntry(row["pattern"], row["attribute"], float(row["weight"]))
                )
        return cls(entries=tuple(entries))


@dataclass(frozen=True)
class ScoredText:
    """Raw (unrounded) inappropriateness score plus the grid verdict."""

    raw_score: float
    scores: AttributeScores
    verdict: Verdict


def score_text(text: str, lexicon: Lexicon, threshold: float = 0.5) -> ScoredText:
    """Score text against the lexicon.

    Per attribute: min(1, sum of weights of matched patterns), where a
    pattern matches if its normalized token sequence appears contiguously in
    the normalized text. The raw score is the pre-rounding maximum across
    attributes; the flag is inappropriate when raw_score >= threshold.
    """
    tokens = _normalize(text)
    token_set = set(tokens)
    raw: dict[str, float] = {}
    matched: list[str] = []
    for pattern_tokens, attribute, weight in lexicon._tokenized:
        if len(pattern_tokens) == 1:
            hit = pattern_tokens[0] in token_set
        else:
            first = pattern_tokens[0]
            span = len(pattern_tokens)
            hit = any(
                tokens[i : i + span] == pattern_tokens
                for i in range(len(tokens) - span + 1)
                if tokens[i] == first
            )
        if hit:
            raw[attribute] = min(1.0, raw.get(attribute, 0.0) + weight)
            matched.append(" ".join(pattern_tokens))

    raw_score = max(raw.values(), default=0.0)
    scores = AttributeScores(
        tenths=tuple(_round_tenth(raw.get(name, 0.0)) for name in ATTRIBUTE_NAMES)
    )
    flag = FLAG_INAPPROPRIATE if raw_score >= threshold else FLAG_APPROPRIATE
    explanation = (
        "matched: " + ", ".join(sorted(set(matched))) if matched else "no lexicon matches"
    )
    verdict = Verdict(flag=flag, scores=scores, explanation=explanation)
    return ScoredText(raw_score=raw_score, scores=scores, verdict=verdict)
