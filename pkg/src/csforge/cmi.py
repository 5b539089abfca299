"""Code-Mixing Index over tagged utterances.

CMI = 100 * (1 - max(w_i) / (n - u)) when n > u, else 0, where w_i are the
per-language word counts, n the total token count, and u the count of
language-independent tokens. The value lives in [0, 50]: above 50 the
dominant and matrix languages would simply swap roles.

Buckets follow the low/medium/high ranges with half-open boundaries:
low [0, 16.7), medium [16.7, 30), high [30, 50]. The 16.7 boundary is the
literal decimal, not 1/6 (see the report header note).
"""

from __future__ import annotations

from dataclasses import dataclass, field
from enum import Enum
from typing import Dict, Iterable, List, Tuple

from .langid import LanguageTag, TaggedUtterance

LOW_MEDIUM_BOUNDARY = 16.7
MEDIUM_HIGH_BOUNDARY = 30.0
CMI_MAX = 50.0

# Boundary convention note, embedded in analyze reports.
BOUNDARY_NOTE = "bucket boundaries: low [0,16.7), medium [16.7,30), high [30,50]; 16.7 is the literal decimal"


class CmiBucket(Enum):
    LOW = "low"
    MEDIUM = "medium"
    HIGH = "high"


@dataclass(frozen=True)
class CmiBreakdown:
    counts_per_language: Dict[LanguageTag, int]
    max_w: int
    n: int
    u: int
    cmi_percent: float


@dataclass
class CmiStats:
    n_utterances: int
    mean_cmi: float
    histogram: Dict[CmiBucket, int]
    per_utterance: List[Tuple[str, float]] = field(default_factory=list)


def compute_cmi(utterance: TaggedUtterance) -> CmiBreakdown:
    counts: Dict[LanguageTag, int] = {}
    u = 0
    for _, tag in utterance.tokens:
        if tag is LanguageTag.INDEPENDENT:
            u += 1
        else:
            counts[tag] = counts.get(tag, 0) + 1
    n = len(utterance.tokens)
    max_w = max(counts.values(), default=0)
    if n == u:
        cmi = 0.0
    else:
        cmi = 100.0 * (1.0 - max_w / (n - u))
    return CmiBreakdown(counts_per_language=counts, max_w=max_w, n=n, u=u, cmi_percent=cmi)


def bucket_of(cmi_percent: float) -> CmiBucket:
    if not (0.0 <= cmi_percent <= CMI_MAX):
        raise ValueError(f"cmi_percent {cmi_percent} outside [0, {CMI_MAX}]")
    if cmi_percent < LOW_MEDIUM_BOUNDARY:
        return CmiBucket.LOW
    if cmi_percent < MEDIUM_HIGH_BOUNDARY:
        return CmiBucket.MEDIUM
    return CmiBucket.HIGH


def corpus_stats(utterances: Iterable[Tuple[str, TaggedUtterance]]) -> CmiStats:
    histogram = {bucket: 0 for bucket in CmiBucket}
    per_utterance: List[Tuple[str, float]] = []
    for item_id, utt in utterances:
        cmi = compute_cmi(utt).cmi_percent
        per_utterance.append((item_id, cmi))
        histogram[bucket_of(cmi)] += 1
    n = len(per_utterance)
    mean = sum(c for _, c in per_utterance) / n if n else 0.0
    return CmiStats(n_utterances=n, mean_cmi=mean, histogram=histogram, per_utterance=per_utterance)
