"""CommonSenseQA ingestion, question-only code-switching, QA sampling,
k-fold splitting, and aligned Hindi test-set import.

JSONL files may carry a provenance header as line 1, distinguished by the
reserved id "__manifest__". Answer choices are never code-switched; only the
question stem is transformed.
"""

from __future__ import annotations

import csv
import json
import math
import os
import random
import time
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Callable, Dict, List, Optional, Tuple

from . import __version__
from .cmi import CmiBucket
from .errors import (
    AbortThresholdExceeded,
    AlignmentError,
    InsufficientItems,
    ParseError,
    SchemaError,
    UncoverableSentence,
    ValidationError,
)
from .generate import GenerationOutcome, GenerationSpec

MANIFEST_ID = "__manifest__"
CHOICE_LABELS = ("A", "B", "C", "D", "E")
ABORT_FAILURE_RATE = 0.5


@dataclass(frozen=True)
class McqItem:
    id: str
    stem: str
    choices: Tuple[Tuple[str, str], ...]  # (label, text), labels A..E in order
    answer_key: str
    cs_stem: Optional[str] = None
    cmi: Optional[float] = None
    bucket: Optional[CmiBucket] = None
    generator_id: Optional[str] = None
    hindi_stem: Optional[str] = None
    extra: Dict[str, object] = field(default_factory=dict, hash=False)

    def __post_init__(self):
        labels = tuple(label for label, _ in self.choices)
        if labels != CHOICE_LABELS:
            raise SchemaError(self.id, f"expected choice labels {CHOICE_LABELS}, got {labels}")
        if self.answer_key not in labels:
            raise SchemaError(self.id, f"answerKey {self.answer_key!r} not among choice labels")
        if self.cs_stem is not None and (self.cmi is None or self.bucket is None):
            raise SchemaError(self.id, "cs_stem present without cmi/bucket")

    def choice_text(self, label: str) -> str:
        for lab, text in self.choices:
            if lab == label:
                return text
        raise KeyError(label)


@dataclass
class DatasetManifest:
    items: List[McqItem]
    provenance: Dict[str, object] = field(default_factory=dict)

    def __post_init__(self):
        ids = [it.id for it in self.items]
        if len(set(ids)) != len(ids):
            dup = next(i for i in ids if ids.count(i) > 1)
            raise ValidationError(f"duplicate item id {dup!r}")


@dataclass(frozen=True)
class FoldAssignment:
    k: int
    assignment: Dict[str, int]

    def fold_ids(self, fold: int) -> List[str]:
        return [i for i, f in self.assignment.items() if f == fold]


def _created_at() -> str:
    # Honors SOURCE_DATE_EPOCH so seeded reruns stay byte-identical.
    epoch = os.environ.get("SOURCE_DATE_EPOCH")
    t = int(epoch) if epoch else int(time.time())
    return time.strftime("%Y-%m-%dT%H:%M:%SZ", time.gmtime(t))


def _parse_item(obj: dict, line_no: int) -> McqItem:
    item_id = obj.get("id")
    if not isinstance(item_id, str) or not item_id:
        raise SchemaError(str(item_id), "missing or non-string id")
    question = obj.get("question")
    if not isinstance(question, dict) or "stem" not in question:
        raise SchemaError(item_id, "missing question.stem")
    raw_choices = question.get("choices")
    if not isinstance(raw_choices, list) or len(raw_choices) != 5:
        raise SchemaError(item_id, f"expected 5 choices, got {len(raw_choices) if isinstance(raw_choices, list) else raw_choices!r}")
    choices = tuple(sorted(((c["label"], c["text"]) for c in raw_choices), key=lambda lt: lt[0]))
    answer_key = obj.get("answerKey")
    if answer_key is None:
        raise SchemaError(item_id, "missing answerKey")
    bucket = CmiBucket(obj["bucket"]) if "bucket" in obj else None
    known = {"id", "question", "answerKey", "cs_stem", "cmi", "bucket", "generator", "hindi_stem"}
    extra = {k: v for k, v in obj.items() if k not in known}
    return McqItem(
        id=item_id,
        stem=question["stem"],
        choices=choices,
        answer_key=answer_key,
        cs_stem=obj.get("cs_stem"),
        cmi=obj.get("cmi"),
        bucket=bucket,
        generator_id=obj.get("generator"),
        hindi_stem=obj.get("hindi_stem"),
        extra=extra,
    )


def load_csqa(path) -> DatasetManifest:
    """Load a CommonSenseQA-format JSONL file; line numbers are kept for errors."""
    items: List[McqItem] = []
    provenance: Dict[str, object] = {"source_path": str(path)}
    with open(path, encoding="utf-8") as fh:
        for line_no, raw in enumerate(fh, start=1):
            raw = raw.strip()
            if not raw:
                continue
            try:
                obj = json.loads(raw)
            except json.JSONDecodeError as exc:
                raise ParseError(line_no, f"malformed JSON: {exc.msg}") from exc
            if obj.get("id") == MANIFEST_ID:
                provenance.update({k: v for k, v in obj.items() if k != "id"})
                continue
            items.append(_parse_item(obj, line_no))
    return DatasetManifest(items=items, provenance=provenance)


def item_to_json(item: McqItem) -> dict:
    obj: Dict[str, object] = {
        "id": item.id,
        "question": {
            "stem": item.stem,
            "choices": [{"label": lab, "text": text} for lab, text in item.choices],
        },
        "answerKey": item.answer_key,
    }
    obj.update(item.extra)
    if item.cs_stem is not None:
        obj["cs_stem"] = item.cs_stem
        obj["cmi"] = item.cmi
        obj["bucket"] = item.bucket.value
        obj["generator"] = item.generator_id
    if item.hindi_stem is not None:
        obj["hindi_stem"] = item.hindi_stem
    return obj


def save_manifest(manifest: DatasetManifest, path) -> None:
    header = {"id": MANIFEST_ID, "tool_version": __version__, "created_at": _created_at()}
    header.update({k: v for k, v in manifest.provenance.items() if k not in header})
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(json.dumps(header, ensure_ascii=False, sort_keys=True) + "\n")
        for item in manifest.items:
            fh.write(json.dumps(item_to_json(item), ensure_ascii=False) + "\n")


def codeswitch_dataset(
    manifest: DatasetManifest,
    generator: Callable[[str], GenerationOutcome],
    spec: GenerationSpec,
) -> Tuple[DatasetManifest, List[str]]:
    """Pass each stem through the generator; keep accepted items, drop and
    report the rest. Choices and answer keys are never touched."""
    for item in manifest.items:
        if item.cs_stem is not None:
            raise ValidationError(f"item {item.id!r} already has cs_stem")
    kept: List[McqItem] = []
    dropped: List[str] = []
    for item in manifest.items:
        try:
            outcome = generator(item.stem)
        except UncoverableSentence:
            dropped.append(item.id)
            continue
        if not outcome.accepted:
            dropped.append(item.id)
            continue
        kept.append(
            replace(
                item,
                cs_stem=outcome.text,
                cmi=outcome.breakdown.cmi_percent,
                bucket=spec.target_bucket,
                generator_id=spec.generator_id,
            )
        )
    total = len(manifest.items)
    if total and len(dropped) / total > ABORT_FAILURE_RATE:
        raise AbortThresholdExceeded(
            f"{len(dropped)}/{total} items rejected; check lexicon/endpoint configuration"
        )
    provenance = dict(manifest.provenance)
    provenance.update(
        {
            "generator_id": spec.generator_id,
            "target_bucket": spec.target_bucket.value,
            "seed": spec.seed,
        }
    )
    return DatasetManifest(items=kept, provenance=provenance), dropped


def qa_sample(manifest: DatasetManifest, batch_size: int = 50, seed: int = 0) -> List[dict]:
    """One seeded-uniform review pick per consecutive batch of items."""
    if batch_size < 1:
        raise ValidationError("batch_size must be >= 1")
    rng = random.Random(seed)
    rows = []
    for batch_index in range(math.ceil(len(manifest.items) / batch_size)):
        batch = manifest.items[batch_index * batch_size : (batch_index + 1) * batch_size]
        pick = batch[rng.randrange(len(batch))]
        rows.append(
            {"batch": batch_index, "id": pick.id, "stem": pick.stem, "cs_stem": pick.cs_stem or ""}
        )
    return rows


def write_qa_csv(rows: List[dict], path) -> None:
    with open(path, "w", encoding="utf-8", newline="") as fh:
        writer = csv.DictWriter(fh, fieldnames=["batch", "id", "stem", "cs_stem"])
        writer.writeheader()
        writer.writerows(rows)


def kfold_split(manifest: DatasetManifest, k: int = 5, seed: int = 0) -> FoldAssignment:
    """Seeded shuffle, then round-robin fold assignment (sizes differ by <= 1)."""
    if len(manifest.items) < k:
        raise InsufficientItems(f"{len(manifest.items)} items < k={k}")
    if k < 1:
        raise ValidationError("k must be >= 1")
    ids = [item.id for item in manifest.items]
    random.Random(seed).shuffle(ids)
    return FoldAssignment(k=k, assignment={item_id: i % k for i, item_id in enumerate(ids)})


def import_translated(path, base: DatasetManifest) -> DatasetManifest:
    """Attach stems from an id-aligned translated JSONL as hindi_stem."""
    translated = load_csqa(path)
    trans_by_id = {item.id: item for item in translated.items}
    base_ids = {item.id for item in base.items}
    for missing in sorted(base_ids - trans_by_id.keys()):
        raise AlignmentError(missing, "missing from translated file")
    for extra_id in sorted(trans_by_id.keys() - base_ids):
        raise AlignmentError(extra_id, "not present in base manifest")
    items = [replace(item, hindi_stem=trans_by_id[item.id].stem) for item in base.items]
    provenance = dict(base.provenance)
    provenance["translated_source"] = str(path)
    provenance["language"] = "Hindi"
    return DatasetManifest(items=items, provenance=provenance)
