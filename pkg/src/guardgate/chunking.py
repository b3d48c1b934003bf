"""Token counting, chunking of long inputs, and verdict aggregation.

The service operates on a 3K-token budget per model call; longer inputs are
split into chunks at sentence boundaries where possible and the per-chunk
verdicts are folded into one conservative overall verdict (any-flag,
attribute-wise max). The default token proxy counts maximal runs of
non-whitespace; a real subword tokenizer can be plugged in via
`TokenizerPolicy.tokenizer`.
"""

from __future__ import annotations

import re
from dataclasses import dataclass
from typing import Callable

from .codec import ATTRIBUTES, FLAG_APPROPRIATE, FLAG_INAPPROPRIATE, AttributeScores, Verdict

DEFAULT_MAX_TOKENS = 3000

_TOKEN_RE = re.compile(r"\S+")
_SENTENCE_END = ".!?"


class EmptyInputError(ValueError):
    pass


@dataclass(frozen=True)
class TokenizerPolicy:
    """Tokenization policy: whitespace by default, pluggable otherwise.

    A pluggable tokenizer maps text to a token count; chunk boundaries are
    still located on whitespace tokens, so counts from a custom tokenizer
    are advisory for splitting.
    """

    max_tokens: int = DEFAULT_MAX_TOKENS
    tokenizer: Callable[[str], int] | None = None

    def __post_init__(self) -> None:
        if self.max_tokens < 1:
            raise ValueError("max_tokens must be >= 1")

    @property
    def kind(self) -> str:
        return "whitespace" if self.tokenizer is None else "pluggable"


@dataclass(frozen=True)
class Chunk:
    index: int
    text: str
    token_count: int


def count_tokens(text: str, policy: TokenizerPolicy | None = None) -> int:
    """Deterministic token count under the policy (whitespace runs by default)."""
    if policy is not None and policy.tokenizer is not None:
        return policy.tokenizer(text)
    return len(_TOKEN_RE.findall(text))


def _token_spans(text: str) -> list[tuple[int, int]]:
    return [m.span() for m in _TOKEN_RE.finditer(text)]


def split_chunks(text: str, policy: TokenizerPolicy | None = None) -> list[Chunk]:
    """Split text greedily into chunks of at most `policy.max_tokens` tokens.

    Prefers to break after the last sentence end (., !, ? or a newline gap)
    inside the window, falling back to a hard split at the token limit.
    Chunk texts are contiguous substrings of the input; their token counts
    sum to `count_tokens(text)` under the default policy.
    """
    policy = policy or TokenizerPolicy()
    spans = _token_spans(text)
    if not spans:
        return []
    max_tokens = policy.max_tokens

    # A token ends a sentence if its last char is terminal punctuation or
    # the whitespace gap after it contains a newline.
    def is_sentence_end(k: int) -> bool:
        start, end = spans[k]
        if text[end - 1] in _SENTENCE_END:
            return True
        gap_end = spans[k + 1][0] if k + 1 < len(spans) else len(text)
        return "\n" in text[end:gap_end]

    chunks: list[Chunk] = []
    i = 0
    while i < len(spans):
        window_last = min(i + max_tokens, len(spans)) - 1  # last token index allowed
        if window_last == len(spans) - 1:
            k = window_last  # remainder fits
        else:
            k = next(
                (j for j in range(window_last, i - 1, -1) if is_sentence_end(j)),
                window_last,
            )
        chunk_text = text[spans[i][0] : spans[k][1]]
        chunks.append(Chunk(index=len(chunks), text=chunk_text, token_count=k - i + 1))
        i = k + 1
    return chunks


def aggregate_verdicts(verdicts: list[Verdict]) -> Verdict:
    """Fold chunk verdicts into one: inappropriate if any chunk is,
    attribute scores are element-wise maxima, and non-empty explanations
    are concatenated tagged by chunk index."""
    if not verdicts:
        raise EmptyInputError("cannot aggregate an empty verdict list")
    tenths = tuple(
        max(v.scores.tenths[i] for v in verdicts) for i in range(len(ATTRIBUTES))
    )
    flag = FLAG_INAPPROPRIATE if any(v.inappropriate for v in verdicts) else FLAG_APPROPRIATE
    notes = [f"[chunk {i}] {v.explanation}" for i, v in enumerate(verdicts) if v.explanation]
    return Verdict(flag=flag, scores=AttributeScores(tenths=tenths), explanation="\n".join(notes))
