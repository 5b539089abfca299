"""Tokenization and per-token language tagging via Unicode script membership.

Hindi is identified by Devanagari-block codepoints, English by Latin-block
letters; tokens without letters (digits, punctuation, symbols) carry no
language signal. Mixed-script tokens are resolved by per-letter majority,
with ties falling back to language-independent. Romanized Hindi is therefore
tagged as English by design.
"""

from __future__ import annotations

import unicodedata
from dataclasses import dataclass
from enum import Enum
from typing import List, Tuple

# Devanagari proper plus Devanagari Extended; combining marks (matras, nukta)
# live inside these blocks and inherit the script.
_DEVANAGARI_RANGES = ((0x0900, 0x097F), (0xA8E0, 0xA8FF))
# Basic Latin letters plus Latin-1 Supplement / Latin Extended-A/B letters.
_LATIN_RANGES = ((0x0041, 0x005A), (0x0061, 0x007A), (0x00C0, 0x024F))


class LanguageTag(Enum):
    L1_HINDI = "hi"
    L2_ENGLISH = "en"
    INDEPENDENT = "other"


@dataclass(frozen=True)
class RawToken:
    text: str
    char_span: Tuple[int, int]  # codepoint offsets into the source string

    def __post_init__(self):
        if not self.text:
            raise ValueError("RawToken.text must be non-empty")


@dataclass(frozen=True)
class TaggedUtterance:
    source: str
    tokens: Tuple[Tuple[RawToken, LanguageTag], ...]


def _in_ranges(cp: int, ranges) -> bool:
    return any(lo <= cp <= hi for lo, hi in ranges)


def _is_detachable(ch: str) -> bool:
    # Punctuation and symbol codepoints get split into their own tokens.
    return unicodedata.category(ch)[0] in ("P", "S")


def tokenize(text: str) -> List[RawToken]:
    """Split on Unicode whitespace, then detach leading/trailing punctuation
    and symbol codepoints into separate single-character tokens."""
    tokens: List[RawToken] = []
    i = 0
    n = len(text)
    while i < n:
        if text[i].isspace():
            i += 1
            continue
        j = i
        while j < n and not text[j].isspace():
            j += 1
        # [i, j) is one whitespace-delimited chunk; peel punctuation off both ends.
        start, end = i, j
        lead = []
        while start < end and _is_detachable(text[start]):
            lead.append(RawToken(text[start], (start, start + 1)))
            start += 1
        trail = []
        while end > start and _is_detachable(text[end - 1]):
            trail.append(RawToken(text[end - 1], (end - 1, end)))
            end -= 1
        tokens.extend(lead)
        if start < end:
            tokens.append(RawToken(text[start:end], (start, end)))
        tokens.extend(reversed(trail))
        i = j
    return tokens


def classify_token(token: RawToken) -> LanguageTag:
    """Tag by per-letter script majority; no letters or a tie → Independent."""
    dev = 0
    lat = 0
    for ch in token.text:
        cat = unicodedata.category(ch)[0]
        if cat not in ("L", "M"):
            continue
        cp = ord(ch)
        if _in_ranges(cp, _DEVANAGARI_RANGES):
            dev += 1
        elif _in_ranges(cp, _LATIN_RANGES):
            lat += 1
    if dev > lat:
        return LanguageTag.L1_HINDI
    if lat > dev:
        return LanguageTag.L2_ENGLISH
    return LanguageTag.INDEPENDENT


def tag_utterance(text: str) -> TaggedUtterance:
    tokens = tuple((tok, classify_token(tok)) for tok in tokenize(text))
    return TaggedUtterance(source=text, tokens=tokens)
