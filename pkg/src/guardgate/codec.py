"""Verdict data model and the compact coded wire format.

A verdict is an overall appropriate/inappropriate flag plus sixteen safety
attribute scores on a tenth grid (0.0, 0.1, ..., 1.0). Two text renderings
exist:

* coded   -- ``"true A2B2C1E1G1I1K10M1N2"``: a flag token ("true" means
  inappropriate) followed by letter/value pairs in fixed A..P attribute
  order, value = score x 10, zero scores omitted. Compact enough for
  short-decode serving; this grammar is a frozen wire contract.
* uncoded -- a JSON object keyed by the attribute display names (e.g.
  ``"Death, Harm & Tragedy"``) with an "Appropriateness" label and an
  optional "Explanation". Used by the long-prompt fallback path.

The encoder is strict (canonical output only); the decoder is lenient about
letter order, surrounding whitespace, and explicit zero values, because the
upstream model output is noisy. Everything here is pure and thread-safe.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field

# Canonical attribute order. Letters A..P, snake_case field names, and the
# display names used by the uncoded JSON format are all derived from this
# table; reordering it would break the wire contract.
ATTRIBUTES: tuple[tuple[str, str], ...] = (
    ("derogatory", "Derogatory"),
    ("toxic", "Toxic"),
    ("violent", "Violent"),
    ("sexual", "Sexual"),
    ("insult", "Insult"),
    ("obscene", "Obscene"),
    ("death_harm_tragedy", "Death, Harm & Tragedy"),
    ("firearms_weapons", "Firearms & Weapons"),
    ("public_safety", "Public Safety"),
    ("health", "Health"),
    ("religion_belief", "Religion & Belief"),
    ("drugs", "Drugs"),
    ("war_conflict", "War & Conflict"),
    ("politics", "Politics"),
    ("finance", "Finance"),
    ("legal", "Legal"),
)

ATTRIBUTE_NAMES: tuple[str, ...] = tuple(name for name, _ in ATTRIBUTES)
DISPLAY_NAMES: tuple[str, ...] = tuple(display for _, display in ATTRIBUTES)
LETTERS = "ABCDEFGHIJKLMNOP"

_NAME_INDEX = {name: i for i, (name, _) in enumerate(ATTRIBUTES)}
_DISPLAY_INDEX = {display: i for i, (_, display) in enumerate(ATTRIBUTES)}

FLAG_APPROPRIATE = "appropriate"
FLAG_INAPPROPRIATE = "inappropriate"


class ParseError(ValueError):
    """Raised when coded or uncoded verdict text cannot be parsed.

    Carries the byte offset of the offending position and a short reason;
    the scheduler's fallback path triggers on this error.
    """

    def __init__(self, reason: str, offset: int = 0):
        super().__init__(f"{reason} (byte offset {offset})")
        self.reason = reason
        self.offset = offset


def _round_tenth(value: float) -> int:
    """Round a [0,1] score half-up to the tenth grid, returning tenths."""
    if value != value:  # NaN
        raise ValueError("score is NaN")
    clamped = min(1.0, max(0.0, float(value)))
    return min(10, int(clamped * 10 + 0.5))


@dataclass(frozen=True)
class AttributeScores:
    """Sixteen safety-attribute scores, stored as integer tenths 0..10.

    Integer storage makes equality exact; use `get`/`as_dict` for the
    float view.
    """

    tenths: tuple[int, ...]

    def __post_init__(self) -> None:
        if len(self.tenths) != len(ATTRIBUTES):
            raise ValueError(f"expected {len(ATTRIBUTES)} scores, got {len(self.tenths)}")
        for i, t in enumerate(self.tenths):
            if not isinstance(t, int) or not 0 <= t <= 10:
                raise ValueError(f"score for {ATTRIBUTE_NAMES[i]} out of range: {t!r}")

    @classmethod
    def zeros(cls) -> "AttributeScores":
        return cls(tenths=(0,) * len(ATTRIBUTES))

    @classmethod
    def from_floats(cls, scores: dict[str, float]) -> "AttributeScores":
        """Build from a {field_name: score} mapping; off-grid values are
        rounded half-up to the nearest tenth. Missing attributes are 0."""
        tenths = [0] * len(ATTRIBUTES)
        for name, value in scores.items():
            if name not in _NAME_INDEX:
                raise KeyError(f"unknown attribute {name!r}")
            tenths[_NAME_INDEX[name]] = _round_tenth(value)
        return cls(tenths=tuple(tenths))

    def get(self, name: str) -> float:
        return self.tenths[_NAME_INDEX[name]] / 10

    def as_dict(self) -> dict[str, float]:
        return {name: t / 10 for name, t in zip(ATTRIBUTE_NAMES, self.tenths)}

    def as_display_dict(self) -> dict[str, float]:
        return {display: t / 10 for display, t in zip(DISPLAY_NAMES, self.tenths)}

    def max_score(self) -> float:
        return max(self.tenths) / 10


@dataclass(frozen=True)
class Verdict:
    """Overall appropriateness flag plus attribute scores."""

    flag: str
    scores: AttributeScores = field(default_factory=AttributeScores.zeros)
    explanation: str = ""

    def __post_init__(self) -> None:
        if self.flag not in (FLAG_APPROPRIATE, FLAG_INAPPROPRIATE):
            raise ValueError(f"flag must be appropriate|inappropriate, got {self.flag!r}")

    @property
    def inappropriate(self) -> bool:
        return self.flag == FLAG_INAPPROPRIATE


@dataclass(frozen=True)
class CodedVerdict:
    """Canonical coded string form of a verdict."""

    text: str


def encode_verdict(v: Verdict) -> CodedVerdict:
    """Render a verdict in canonical coded form.

    "true" means inappropriate. Letter/value pairs follow in A..P order with
    value = tenths (1..10 in decimal); zero-score attributes are omitted and
    the explanation is dropped (not representable).
    """
    parts = []
    for letter, t in zip(LETTERS, v.scores.tenths):
        if t > 0:
            parts.append(f"{letter}{t}")
    flag_token = "true" if v.inappropriate else "false"
    if parts:
        return CodedVerdict(text=f"{flag_token} {''.join(parts)}")
    return CodedVerdict(text=flag_token)


def _byte_offset(s: str, index: int) -> int:
    return len(s[:index].encode("utf-8"))


def decode_verdict(text: str) -> Verdict:
    """Parse a coded verdict string; inverse of `encode_verdict` on
    canonical input.

    Lenient about letter order, surrounding/extra whitespace between pairs,
    and explicit zero values ("A0" is accepted and normalized away).
    Unknown letters, out-of-range values, duplicate letters, a bad flag
    token, or trailing garbage raise `ParseError` with the byte offset.
    """
    s = text
    i = 0
    n = len(s)
    while i < n and s[i].isspace():
        i += 1
    flag: str | None = None
    for token, value in (("true", FLAG_INAPPROPRIATE), ("false", FLAG_APPROPRIATE)):
        end = i + len(token)
        if s[i:end] == token and (end >= n or s[end].isspace()):
            flag = value
            i = end
            break
    if flag is None:
        raise ParseError("missing or invalid flag token", _byte_offset(s, i))

    tenths = [0] * len(ATTRIBUTES)
    seen: set[str] = set()
    while i < n:
        if s[i].isspace():
            i += 1
            continue
        letter = s[i]
        idx = LETTERS.find(letter)
        if idx < 0:
            raise ParseError(f"unknown letter {letter!r}", _byte_offset(s, i))
        if letter in seen:
            raise ParseError(f"duplicate letter {letter!r}", _byte_offset(s, i))
        seen.add(letter)
        i += 1
        start = i
        while i < n and s[i].isdigit():
            i += 1
        if start == i:
            raise ParseError(f"missing value after {letter!r}", _byte_offset(s, start))
        value = int(s[start:i])
        if value > 10:
            raise ParseError(f"value {value} outside 0..10", _byte_offset(s, start))
        tenths[idx] = value
    return Verdict(flag=flag, scores=AttributeScores(tenths=tuple(tenths)))


def _extract_balanced_object(text: str) -> tuple[str, int]:
    """Return the first balanced {...} block and its start offset."""
    start = text.find("{")
    if start < 0:
        raise ParseError("no balanced object found", _byte_offset(text, max(len(text) - 1, 0)))
    depth = 0
    for i in range(start, len(text)):
        if text[i] == "{":
            depth += 1
        elif text[i] == "}":
            depth -= 1
            if depth == 0:
                return text[start : i + 1], start
    raise ParseError("no balanced object found", _byte_offset(text, start))


def parse_uncoded(text: str) -> Verdict:
    """Parse the uncoded JSON-style verdict, tolerating surrounding prose.

    Extracts the first balanced {...} block. The object must carry an
    "Appropriateness" label; attribute keys use the display-name spellings
    and default to 0 when absent. Numeric strings are accepted for scores;
    values are clamped to [0,1] and rounded to the tenth grid.
    """
    block, start = _extract_balanced_object(text)
    try:
        obj = json.loads(block)
    except json.JSONDecodeError as exc:
        raise ParseError(f"invalid JSON object: {exc.msg}", _byte_offset(text, start)) from exc
    if not isinstance(obj, dict):
        raise ParseError("object is not a JSON mapping", _byte_offset(text, start))

    label = obj.get("Appropriateness")
    if not isinstance(label, str):
        raise ParseError("missing Appropriateness label", _byte_offset(text, start))
    label_norm = label.strip().lower()
    if label_norm not in (FLAG_APPROPRIATE, FLAG_INAPPROPRIATE):
        raise ParseError(f"unrecognized Appropriateness label {label!r}", _byte_offset(text, start))

    tenths = [0] * len(ATTRIBUTES)
    for key, value in obj.items():
        if key not in _DISPLAY_INDEX:
            continue
        if isinstance(value, str):
            try:
                value = float(value)
            except ValueError as exc:
                raise ParseError(f"non-numeric score for {key!r}", _byte_offset(text, start)) from exc
        if not isinstance(value, (int, float)):
            raise ParseError(f"non-numeric score for {key!r}", _byte_offset(text, start))
        tenths[_DISPLAY_INDEX[key]] = _round_tenth(float(value))

    explanation = obj.get("Explanation", "")
    if not isinstance(explanation, str):
        explanation = str(explanation)
    return Verdict(flag=label_norm, scores=AttributeScores(tenths=tuple(tenths)), explanation=explanation)


def _render_score(tenths: int) -> int | float:
    if tenths == 0:
        return 0
    if tenths == 10:
        return 1
    return tenths / 10


def render_uncoded(v: Verdict, include_explanation: bool = True) -> str:
    """Render a verdict as the uncoded JSON object (the long-mode wire form).

    Scores render as 0, 1, or one-decimal floats; the Explanation key is
    emitted only when present and requested.
    """
    obj: dict[str, object] = {"Appropriateness": v.flag}
    for display, t in zip(DISPLAY_NAMES, v.scores.tenths):
        obj[display] = _render_score(t)
    if include_explanation and v.explanation:
        obj["Explanation"] = v.explanation
    return json.dumps(obj, ensure_ascii=False)
