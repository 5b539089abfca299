"""Supervised fine-tuning loop over a csforge prompt/completion manifest.

The manifest (JSONL of {"prompt", "completion"}) and config (JSON with
epochs, learning_rate, batch_size, optimizer, peft_method, seed, and
pass-through peft_options) are consumed exactly as emitted; the config file
is copied byte-for-byte into the artifact directory. Loss is cross-entropy
over completion tokens only.
"""

from __future__ import annotations

import hashlib
import json
import shutil
from dataclasses import dataclass
from pathlib import Path
from typing import List, Optional, Tuple

import torch
import torch.nn.functional as F

from .model import TinyCausalLM, TinyModelConfig, encode_example, try_quantize_base

BUILTIN_MODELS = {
    "builtin:tiny": TinyModelConfig(),
    "builtin:tiny-wide": TinyModelConfig(dim=128, n_heads=4),
}
DEFAULT_BASE_MODEL = "builtin:tiny"

REQUIRED_CONFIG_KEYS = ("epochs", "learning_rate", "batch_size", "optimizer", "peft_method")


class SchemaMismatch(Exception):
    """Manifest or config does not match the emitted formats; maps to exit 2."""


@dataclass
class AdapterArtifact:
    out_dir: Path
    weights_path: Path
    config_copy_path: Path
    log_path: Path
    step_losses: List[float]
    epochs_completed: int


def load_manifest(path) -> List[Tuple[str, str]]:
    examples = []
    for line_no, raw in enumerate(Path(path).read_text(encoding="utf-8").splitlines(), start=1):
        if not raw.strip():
            continue
        try:
            obj = json.loads(raw)
        except json.JSONDecodeError as exc:
            raise SchemaMismatch(f"manifest line {line_no}: malformed JSON: {exc.msg}") from exc
        if not isinstance(obj, dict) or not isinstance(obj.get("prompt"), str) or not isinstance(obj.get("completion"), str):
            raise SchemaMismatch(f"manifest line {line_no}: expected {{'prompt': str, 'completion': str}}")
        examples.append((obj["prompt"], obj["completion"]))
    if not examples:
        raise SchemaMismatch("manifest contains no training examples")
    return examples


def load_config(path) -> dict:
    try:
        config = json.loads(Path(path).read_text(encoding="utf-8"))
    except json.JSONDecodeError as exc:
        raise SchemaMismatch(f"config: malformed JSON: {exc.msg}") from exc
    missing = [key for key in REQUIRED_CONFIG_KEYS if key not in config]
    if missing:
        raise SchemaMismatch(f"config missing keys: {missing}")
    if config["optimizer"] not in ("adam", "adamw"):
        raise SchemaMismatch(f"unsupported optimizer {config['optimizer']!r}")
    for key in ("epochs", "learning_rate", "batch_size"):
        if not isinstance(config[key], (int, float)) or config[key] <= 0:
            raise SchemaMismatch(f"config {key} must be positive")
    return config


def _batchify(encoded, indices, max_len):
    seqs = [encoded[i] for i in indices]
    width = max(len(ids) for ids, _ in seqs)
    ids = torch.zeros(len(seqs), width, dtype=torch.long)
    labels = torch.full((len(seqs), width), -100, dtype=torch.long)
    for row, (seq, completion_start) in enumerate(seqs):
        ids[row, : len(seq)] = torch.tensor(seq, dtype=torch.long)
        # Labels are next-token targets; only completion positions count.
        for pos in range(len(seq) - 1):
            if pos + 1 >= completion_start:
                labels[row, pos] = seq[pos + 1]
    return ids, labels


def train(
    manifest_path,
    config_path,
    out_dir,
    base_model: str = DEFAULT_BASE_MODEL,
    max_steps: Optional[int] = None,
) -> AdapterArtifact:
    examples = load_manifest(manifest_path)
    config = load_config(config_path)
    if base_model not in BUILTIN_MODELS:
        raise SchemaMismatch(
            f"unknown base model {base_model!r}; available: {sorted(BUILTIN_MODELS)}"
        )

    peft_options = config.get("peft_options") or {}
    model_cfg = BUILTIN_MODELS[base_model]
    if "rank" in peft_options:
        model_cfg = TinyModelConfig(
            dim=model_cfg.dim,
            n_heads=model_cfg.n_heads,
            n_layers=model_cfg.n_layers,
            max_len=model_cfg.max_len,
            lora_rank=int(peft_options["rank"]),
            lora_alpha=float(peft_options.get("alpha", 2 * int(peft_options["rank"]))),
        )

    seed = int(config.get("seed", 0))
    torch.manual_seed(seed)
    model = TinyCausalLM(model_cfg)
    model, quantization_note = try_quantize_base(model)

    trainable = [p for p in model.parameters() if p.requires_grad]
    optimizer_cls = torch.optim.Adam if config["optimizer"] == "adam" else torch.optim.AdamW
    optimizer = optimizer_cls(trainable, lr=float(config["learning_rate"]))

    encoded = [encode_example(p, c, model_cfg.max_len) for p, c in examples]
    batch_size = min(int(config["batch_size"]), len(encoded))
    epochs = int(config["epochs"])

    generator = torch.Generator().manual_seed(seed)
    step_log = []
    step = 0
    epochs_completed = 0
    done = False
    for epoch in range(epochs):
        order = torch.randperm(len(encoded), generator=generator).tolist()
        for start in range(0, len(order), batch_size):
            ids, labels = _batchify(encoded, order[start : start + batch_size], model_cfg.max_len)
            logits = model(ids)
            loss = F.cross_entropy(logits.view(-1, logits.size(-1)), labels.view(-1), ignore_index=-100)
            optimizer.zero_grad()
            loss.backward()
            optimizer.step()
            step_log.append({"step": step, "epoch": epoch, "loss": float(loss.item())})
            step += 1
            if max_steps is not None and step >= max_steps:
                done = True
                break
        if done:
            break
        epochs_completed = epoch + 1

    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    weights_path = out_dir / "adapter_weights.pt"
    torch.save(model.adapter_state_dict(), weights_path)
    config_copy_path = out_dir / "config.json"
    shutil.copyfile(config_path, config_copy_path)

    config_sha = hashlib.sha256(Path(config_path).read_bytes()).hexdigest()
    log = {
        "base_model": base_model,
        "n_examples": len(examples),
        "batch_size": batch_size,
        "epochs_requested": epochs,
        "epochs_completed": epochs_completed,
        "steps": step_log,
        "quantization_note": quantization_note,
        "config_sha256": config_sha,
        "manifest_sha256": hashlib.sha256(Path(manifest_path).read_bytes()).hexdigest(),
    }
    log_path = out_dir / "training_log.json"
    log_path.write_text(json.dumps(log, indent=2) + "\n", encoding="utf-8")

    return AdapterArtifact(
        out_dir=out_dir,
        weights_path=weights_path,
        config_copy_path=config_copy_path,
        log_path=log_path,
        step_losses=[entry["loss"] for entry in step_log],
        epochs_completed=epochs_completed,
    )
