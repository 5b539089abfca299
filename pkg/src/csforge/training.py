"""Fine-tuning artifact emission: prompt/completion manifests and a
hyperparameter config for an external trainer.

Defaults mirror the experimental setup: 5 epochs, learning rate 3e-5,
batch size 32, Adam, QLoRA. Training prompts reuse the evaluation prompt
template so the two stay byte-compatible.
"""

from __future__ import annotations

import hashlib
import json
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Dict, List, Optional

from . import __version__
from .dataset import DatasetManifest, FoldAssignment
from .errors import ValidationError
from .eval import StemVariant, build_prompt


@dataclass(frozen=True)
class TrainingExample:
    prompt: str
    completion: str


@dataclass(frozen=True)
class TrainConfig:
    epochs: int = 5
    learning_rate: float = 3e-5
    batch_size: int = 32
    optimizer: str = "adam"
    peft_method: str = "qlora"
    base_model: str = "meta-llama/Meta-Llama-3-8B-Instruct"
    seed: int = 0
    peft_options: Dict[str, object] = field(default_factory=dict)

    def __post_init__(self):
        if self.epochs <= 0 or self.learning_rate <= 0 or self.batch_size <= 0:
            raise ValidationError("epochs, learning_rate, and batch_size must be positive")


def build_examples(
    manifest: DatasetManifest,
    folds: FoldAssignment,
    held_out_fold: int,
    variant: StemVariant = StemVariant.CODESWITCHED,
) -> List[TrainingExample]:
    if not (0 <= held_out_fold < folds.k):
        raise ValidationError(f"held_out_fold {held_out_fold} outside [0, {folds.k})")
    examples = []
    for item in manifest.items:
        if folds.assignment[item.id] == held_out_fold:
            continue
        completion = f"{item.answer_key}) {item.choice_text(item.answer_key)}"
        examples.append(TrainingExample(prompt=build_prompt(item, variant), completion=completion))
    return examples


def emit_manifest(
    manifest: DatasetManifest,
    folds: FoldAssignment,
    held_out_fold: int,
    out_path,
    variant: StemVariant = StemVariant.CODESWITCHED,
) -> Path:
    examples = build_examples(manifest, folds, held_out_fold, variant)
    out_path = Path(out_path)
    with open(out_path, "w", encoding="utf-8") as fh:
        for ex in examples:
            fh.write(json.dumps({"prompt": ex.prompt, "completion": ex.completion}, ensure_ascii=False) + "\n")
    return out_path


def emit_config(overrides: Optional[dict], out_path, manifest_path=None) -> Path:
    overrides = dict(overrides or {})
    peft_options = overrides.pop("peft_options", {})
    try:
        config = TrainConfig(peft_options=peft_options, **overrides)
    except TypeError as exc:
        raise ValidationError(f"unknown config override: {exc}") from exc
    payload = asdict(config)
    payload["tool_version"] = __version__
    if manifest_path is not None:
        payload["manifest_sha256"] = hashlib.sha256(Path(manifest_path).read_bytes()).hexdigest()
    out_path = Path(out_path)
    out_path.write_text(json.dumps(payload, indent=2, sort_keys=True) + "\n", encoding="utf-8")
    return out_path


def load_config(path) -> TrainConfig:
    data = json.loads(Path(path).read_text(encoding="utf-8"))
    kwargs = {k: v for k, v in data.items() if k in TrainConfig.__dataclass_fields__}
    return TrainConfig(**kwargs)
