"""Evaluation protocol: prompt construction, 5-sample inference, majority
vote, per-fold accuracy, and Table-style aggregation.

Each question is sampled n times (default 5) and scored by the most frequent
parsed answer. Ties among top vote counts and all-unparseable samples both
score as incorrect.
"""

from __future__ import annotations

import statistics
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from enum import Enum
from typing import Dict, List, Optional, Sequence, Tuple, Union

import re

from .dataset import McqItem
from .errors import ContractViolation, EndpointUnavailable, FoldAborted, MissingVariant
from .generate import ModelClient

DEFAULT_N_SAMPLES = 5
DEFAULT_TEMPERATURE = 0.7
DEFAULT_MAX_TOKENS = 16
TRANSPORT_ABORT_RATE = 0.2

_LETTER_RE = re.compile(r"\b([A-Ea-e])\b")


class StemVariant(Enum):
    ENGLISH = "english"
    CODESWITCHED = "codeswitched"
    HINDI = "hindi"


class Vote(Enum):
    UNPARSEABLE = "unparseable"
    NO_MAJORITY_TIE = "no_majority_tie"
    ALL_UNPARSEABLE = "all_unparseable"


ParsedVote = Union[str, Vote]  # option letter or Vote.UNPARSEABLE


@dataclass
class EvalRecord:
    item_id: str
    language: str
    raw_completions: List[str]
    parsed_votes: List[ParsedVote]
    majority: ParsedVote
    correct: bool


@dataclass
class FoldResult:
    fold: int
    language: str
    n_items: int
    n_correct: int
    accuracy: float
    config: str = "run"


@dataclass
class SummaryRow:
    config: str
    language: str
    mean_accuracy: float  # percent
    std_dev: Optional[float]  # percent, sample (n-1); None with a single fold
    fold_accuracies: List[float] = field(default_factory=list)  # percent


def build_prompt(item: McqItem, variant: StemVariant = StemVariant.ENGLISH) -> str:
    if variant is StemVariant.ENGLISH:
        stem = item.stem
    elif variant is StemVariant.CODESWITCHED:
        if item.cs_stem is None:
            raise MissingVariant(f"item {item.id!r} has no code-switched stem")
        stem = item.cs_stem
    else:
        if item.hindi_stem is None:
            raise MissingVariant(f"item {item.id!r} has no Hindi stem")
        stem = item.hindi_stem
    lines = [
        "Answer the following multiple-choice question with exactly one option letter (A, B, C, D, or E).",
        "",
        f"Question: {stem}",
    ]
    lines.extend(f"{label}) {text}" for label, text in item.choices)
    lines.append("Answer:")
    return "\n".join(lines)


def parse_answer(completion: str, item: McqItem) -> ParsedVote:
    """First standalone option letter wins; else the label whose choice text
    appears verbatim earliest in the completion; else unparseable."""
    match = _LETTER_RE.search(completion)
    if match:
        return match.group(1).upper()
    best: Optional[Tuple[int, str]] = None
    for label, text in item.choices:
        pos = completion.find(text)
        if pos >= 0 and (best is None or pos < best[0]):
            best = (pos, label)
    if best is not None:
        return best[1]
    return Vote.UNPARSEABLE


def majority_vote(votes: Sequence[ParsedVote]) -> ParsedVote:
    if len(votes) != DEFAULT_N_SAMPLES:
        raise ContractViolation(f"expected {DEFAULT_N_SAMPLES} votes, got {len(votes)}")
    return _majority_any(votes)


def _score_item(
    client: ModelClient,
    item: McqItem,
    variant: StemVariant,
    language: str,
    n_samples: int,
    params: dict,
    transport_retries: int = 2,
) -> Tuple[EvalRecord, bool]:
    prompt = build_prompt(item, variant)
    completions: Optional[List[str]] = None
    for _ in range(transport_retries + 1):
        try:
            completions = client.generate(prompt, dict(params, n_samples=n_samples))
            break
        except EndpointUnavailable:
            completions = None
    transport_failed = completions is None
    if transport_failed:
        completions = [""] * n_samples
        votes: List[ParsedVote] = [Vote.UNPARSEABLE] * n_samples
    else:
        votes = [parse_answer(text, item) for text in completions]
    majority = _majority_any(votes)
    correct = majority == item.answer_key
    record = EvalRecord(
        item_id=item.id,
        language=language,
        raw_completions=completions,
        parsed_votes=votes,
        majority=majority,
        correct=correct,
    )
    return record, transport_failed


def _majority_any(votes: Sequence[ParsedVote]) -> ParsedVote:
    # Same voting rule for non-default sample counts (ablations).
    counts: Dict[str, int] = {}
    for vote in votes:
        if vote is not Vote.UNPARSEABLE:
            counts[vote] = counts.get(vote, 0) + 1
    if not counts:
        return Vote.ALL_UNPARSEABLE
    top = max(counts.values())
    winners = [label for label, c in counts.items() if c == top]
    return winners[0] if len(winners) == 1 else Vote.NO_MAJORITY_TIE


def evaluate_fold(
    client: ModelClient,
    items: Sequence[McqItem],
    variant: StemVariant = StemVariant.ENGLISH,
    n_samples: int = DEFAULT_N_SAMPLES,
    fold: int = 0,
    config: str = "run",
    temperature: float = DEFAULT_TEMPERATURE,
    max_tokens: int = DEFAULT_MAX_TOKENS,
    max_workers: int = 4,
) -> Tuple[FoldResult, List[EvalRecord]]:
    if not items:
        raise ContractViolation("evaluate_fold requires a non-empty item list")
    language = "Hindi" if variant is StemVariant.HINDI else "English"
    params = {"temperature": temperature, "max_tokens": max_tokens}

    results: Dict[str, Tuple[EvalRecord, bool]] = {}
    with ThreadPoolExecutor(max_workers=max_workers) as pool:
        futures = {
            item.id: pool.submit(_score_item, client, item, variant, language, n_samples, params)
            for item in items
        }
        for item_id, fut in futures.items():
            results[item_id] = fut.result()

    n_transport_failures = sum(1 for _, failed in results.values() if failed)
    if n_transport_failures / len(items) > TRANSPORT_ABORT_RATE:
        raise FoldAborted(f"{n_transport_failures}/{len(items)} items hit transport failures")

    records = [results[item.id][0] for item in items]
    n_correct = sum(1 for r in records if r.correct)
    result = FoldResult(
        fold=fold,
        language=language,
        n_items=len(items),
        n_correct=n_correct,
        accuracy=n_correct / len(items),
        config=config,
    )
    return result, records


def aggregate(folds: Sequence[FoldResult]) -> List[SummaryRow]:
    """Group by (config, language) and report mean / sample std in percent."""
    groups: Dict[Tuple[str, str], List[FoldResult]] = {}
    for fr in folds:
        groups.setdefault((fr.config, fr.language), []).append(fr)
    rows = []
    for (config, language), group in groups.items():
        accs = [fr.accuracy * 100.0 for fr in sorted(group, key=lambda fr: fr.fold)]
        mean = sum(accs) / len(accs)
        std = statistics.stdev(accs) if len(accs) >= 2 else None
        rows.append(SummaryRow(config, language, mean, std, accs))
    return rows


def gap_report(rows: Sequence[SummaryRow], baseline_config: str = "Baseline") -> List[dict]:
    """Per-config English-Hindi gap in percentage points, plus the change
    relative to the baseline gap when a baseline config is present."""
    by_config: Dict[str, Dict[str, SummaryRow]] = {}
    for row in rows:
        by_config.setdefault(row.config, {})[row.language] = row

    baseline_gap: Optional[float] = None
    base = by_config.get(baseline_config)
    if base and "English" in base and "Hindi" in base:
        baseline_gap = base["English"].mean_accuracy - base["Hindi"].mean_accuracy

    report = []
    for config, langs in by_config.items():
        entry: Dict[str, object] = {"config": config}
        if "English" in langs and "Hindi" in langs:
            gap = langs["English"].mean_accuracy - langs["Hindi"].mean_accuracy
            entry["english"] = langs["English"].mean_accuracy
            entry["hindi"] = langs["Hindi"].mean_accuracy
            entry["gap"] = gap
            entry["gap_vs_baseline"] = gap - baseline_gap if baseline_gap is not None else None
            entry["incomplete"] = False
        else:
            entry["incomplete"] = True
        report.append(entry)
    return report
