"""trainer-adapter CLI.

Exit codes: 0 success, 2 schema mismatch (manifest/config/model id),
3 runtime failure (including out-of-memory, with a remediation hint).
"""

from __future__ import annotations

import argparse
import sys

import torch

from . import __version__
from .train import DEFAULT_BASE_MODEL, SchemaMismatch, train


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="trainer-adapter", description=__doc__)
    parser.add_argument("--version", action="version", version=f"trainer-adapter {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)
    p = sub.add_parser("train", help="run a smoke-scale low-rank fine-tune")
    p.add_argument("--manifest", required=True, help="JSONL of prompt/completion pairs")
    p.add_argument("--config", required=True, help="training config JSON")
    p.add_argument("--base-model", default=DEFAULT_BASE_MODEL)
    p.add_argument("--max-steps", type=int, default=None)
    p.add_argument("--out-dir", required=True)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        artifact = train(
            args.manifest,
            args.config,
            args.out_dir,
            base_model=args.base_model,
            max_steps=args.max_steps,
        )
    except SchemaMismatch as exc:
        print(f"schema mismatch: {exc}", file=sys.stderr)
        return 2
    except (torch.cuda.OutOfMemoryError, MemoryError):
        print(
            "out of memory: retry with --base-model builtin:tiny, a smaller "
            "batch_size in the config, or fewer examples",
            file=sys.stderr,
        )
        return 3
    except RuntimeError as exc:
        if "out of memory" in str(exc).lower():
            print(f"out of memory: {exc}; retry with a smaller model or batch size", file=sys.stderr)
            return 3
        raise
    losses = artifact.step_losses
    print(
        f"trained {len(losses)} steps ({artifact.epochs_completed} full epochs); "
        f"loss {losses[0]:.4f} -> {losses[-1]:.4f}; artifact at {artifact.out_dir}"
    )
    return 0


if __name__ == "__main__":
    sys.exit(main())
