"""csforge command-line interface.

Subcommands: analyze, generate, split, evaluate, report, qa-sample,
emit-train. Exit codes: 0 success, 2 usage/validation error, 3
runtime/transport failure. Every invocation writes a run manifest recording
the resolved arguments, seed, tool version, and wall-clock duration.
"""

from __future__ import annotations

import argparse
import csv
import json
import sys
import time
from pathlib import Path
from typing import List, Optional

from . import __version__
from . import cmi as cmi_mod
from . import dataset as ds
from . import eval as ev
from . import generate as gen
from . import training
from .client import EndpointClient
from .errors import RuntimeFailure, ValidationError
from .langid import tag_utterance

EXIT_OK = 0
EXIT_USAGE = 2
EXIT_RUNTIME = 3


class _MockClient:
    """Deterministic offline stand-in for a model endpoint.

    mode 'correct' answers every prompt with its item's answer key;
    mode 'incorrect' answers with a fixed wrong label; mode 'seeded'
    answers with a label derived from a hash of the prompt.
    """

    def __init__(self, mode: str, answer_by_prompt: dict):
        self.mode = mode
        self.answer_by_prompt = answer_by_prompt

    def generate(self, prompt: str, params: dict) -> List[str]:
        n = params.get("n_samples", 1)
        key = self.answer_by_prompt.get(prompt, "A")
        if self.mode == "correct":
            label = key
        elif self.mode == "incorrect":
            label = "A" if key != "A" else "B"
        else:  # seeded: stable pseudo-random pick per prompt
            import hashlib

            digest = hashlib.sha256(prompt.encode("utf-8")).digest()
            label = "ABCDE"[digest[0] % 5]
        return [label] * n


def _write_run_manifest(path: Path, payload: dict) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(json.dumps(payload, indent=2, sort_keys=True) + "\n", encoding="utf-8")


def _variant(name: str) -> ev.StemVariant:
    return ev.StemVariant(name)


def _round1(x: float) -> float:
    return round(x, 1)


def cmd_analyze(args) -> int:
    manifest = ds.load_csqa(args.input)
    utterances = [
        (item.id, tag_utterance(item.cs_stem if item.cs_stem is not None else item.stem))
        for item in manifest.items
    ]
    stats = cmi_mod.corpus_stats(utterances)
    report = {
        "boundary_note": cmi_mod.BOUNDARY_NOTE,
        "n_utterances": stats.n_utterances,
        "mean_cmi": _round1(stats.mean_cmi),
        "histogram": {bucket.value: stats.histogram[bucket] for bucket in cmi_mod.CmiBucket},
        "items": [
            {"id": item_id, "cmi": _round1(c), "bucket": cmi_mod.bucket_of(c).value}
            for item_id, c in stats.per_utterance
        ],
    }
    Path(args.report).write_text(json.dumps(report, indent=2) + "\n", encoding="utf-8")
    return EXIT_OK


def cmd_generate(args) -> int:
    manifest = ds.load_csqa(args.input)
    bucket = cmi_mod.CmiBucket(args.bucket)
    spec = gen.GenerationSpec(
        target_bucket=bucket,
        seed=args.seed,
        max_attempts=args.max_attempts,
        generator_id=args.generator,
    )
    if args.generator == "lexicon":
        if not args.lexicon:
            raise ValidationError("--lexicon is required with the lexicon generator")
        lexicon = gen.load_lexicon(args.lexicon)

        def generator(stem: str) -> gen.GenerationOutcome:
            return gen.substitute(stem, lexicon, spec)

    else:
        if not args.endpoint:
            raise ValidationError("--endpoint is required with the endpoint generator")
        client = EndpointClient(args.endpoint, model=args.model)

        def generator(stem: str) -> gen.GenerationOutcome:
            return gen.generate_via_endpoint(stem, client, spec)

    out_manifest, dropped = ds.codeswitch_dataset(manifest, generator, spec)
    ds.save_manifest(out_manifest, args.out)
    Path(str(args.out) + ".dropped.txt").write_text(
        "".join(f"{item_id}\n" for item_id in dropped), encoding="utf-8"
    )
    print(f"accepted {len(out_manifest.items)}, dropped {len(dropped)}")
    return EXIT_OK


def cmd_split(args) -> int:
    manifest = ds.load_csqa(args.input)
    folds = ds.kfold_split(manifest, k=args.k, seed=args.seed)
    out_dir = Path(args.out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    by_fold = {i: [] for i in range(args.k)}
    for item in manifest.items:
        by_fold[folds.assignment[item.id]].append(item)
    for i in range(args.k):
        ds.save_manifest(
            ds.DatasetManifest(items=by_fold[i], provenance=dict(manifest.provenance, fold=i)),
            out_dir / f"fold_{i}.jsonl",
        )
    (out_dir / "folds.json").write_text(
        json.dumps({"k": folds.k, "seed": args.seed, "assignment": folds.assignment}, indent=2, sort_keys=True)
        + "\n",
        encoding="utf-8",
    )
    return EXIT_OK


def cmd_evaluate(args) -> int:
    manifest = ds.load_csqa(args.dataset)
    variant = _variant(args.variant)
    if args.mock is None and not args.endpoint:
        raise ValidationError("one of --endpoint or --mock is required")
    if args.mock is not None:
        answers = {ev.build_prompt(it, variant): it.answer_key for it in manifest.items}
        client = _MockClient(args.mock, answers)
    else:
        client = EndpointClient(args.endpoint, model=args.model)
    result, records = ev.evaluate_fold(
        client,
        manifest.items,
        variant=variant,
        n_samples=args.samples,
        fold=args.fold,
        config=args.config_name,
        temperature=args.temperature,
        max_tokens=args.max_tokens,
    )
    out = Path(args.out)
    with open(out, "w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["config", "language", "fold", "n_items", "n_correct", "accuracy"])
        writer.writerow(
            [result.config, result.language, result.fold, result.n_items, result.n_correct, f"{result.accuracy:.6f}"]
        )
    records_path = Path(args.records) if args.records else Path(str(out) + ".records.jsonl")
    with open(records_path, "w", encoding="utf-8") as fh:
        for rec in records:
            fh.write(
                json.dumps(
                    {
                        "item_id": rec.item_id,
                        "language": rec.language,
                        "raw_completions": rec.raw_completions,
                        "parsed_votes": [v.value if isinstance(v, ev.Vote) else v for v in rec.parsed_votes],
                        "majority": rec.majority.value if isinstance(rec.majority, ev.Vote) else rec.majority,
                        "correct": rec.correct,
                    },
                    ensure_ascii=False,
                )
                + "\n"
            )
    print(f"accuracy {result.accuracy:.4f} ({result.n_correct}/{result.n_items})")
    return EXIT_OK


def _load_fold_results(results_dir: Path) -> List[ev.FoldResult]:
    folds = []
    for path in sorted(results_dir.glob("*.csv")):
        with open(path, encoding="utf-8", newline="") as fh:
            for row in csv.DictReader(fh):
                folds.append(
                    ev.FoldResult(
                        fold=int(row["fold"]),
                        language=row["language"],
                        n_items=int(row["n_items"]),
                        n_correct=int(row["n_correct"]),
                        accuracy=float(row["accuracy"]),
                        config=row["config"],
                    )
                )
    return folds


def cmd_report(args) -> int:
    results_dir = Path(args.results_dir)
    folds = _load_fold_results(results_dir)
    if not folds:
        raise ValidationError(f"no results CSVs found in {results_dir}")
    rows = sorted(ev.aggregate(folds), key=lambda r: (r.config, r.language))
    gaps = ev.gap_report(rows)
    out_dir = Path(args.out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)

    def fmt(x: Optional[float]) -> str:
        return "" if x is None else f"{x:.2f}"

    with open(out_dir / "summary.csv", "w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["config", "language", "mean_accuracy", "std_dev", "fold_accuracies"])
        for row in rows:
            writer.writerow(
                [row.config, row.language, fmt(row.mean_accuracy), fmt(row.std_dev),
                 ";".join(f"{a:.2f}" for a in row.fold_accuracies)]
            )

    if args.format in ("markdown", "both"):
        lines = ["| Config | Language | Mean Accuracy (%) | Std Dev (%) |", "|---|---|---|---|"]
        for row in rows:
            lines.append(f"| {row.config} | {row.language} | {fmt(row.mean_accuracy)} | {fmt(row.std_dev)} |")
        lines.append("")
        lines.append("| Config | English (%) | Hindi (%) | Gap (pp) | Gap vs Baseline (pp) |")
        lines.append("|---|---|---|---|---|")
        for entry in gaps:
            if entry.get("incomplete"):
                lines.append(f"| {entry['config']} | — | — | incomplete | — |")
            else:
                vs = entry["gap_vs_baseline"]
                lines.append(
                    f"| {entry['config']} | {fmt(entry['english'])} | {fmt(entry['hindi'])} "
                    f"| {fmt(entry['gap'])} | {fmt(vs) if vs is not None else ''} |"
                )
        (out_dir / "summary.md").write_text("\n".join(lines) + "\n", encoding="utf-8")
    return EXIT_OK


def cmd_qa_sample(args) -> int:
    manifest = ds.load_csqa(args.input)
    rows = ds.qa_sample(manifest, batch_size=args.every, seed=args.seed)
    ds.write_qa_csv(rows, args.out)
    print(f"{len(rows)} review rows")
    return EXIT_OK


def cmd_emit_train(args) -> int:
    manifest = ds.load_csqa(args.input)
    folds_data = json.loads(Path(args.folds).read_text(encoding="utf-8"))
    folds = ds.FoldAssignment(k=folds_data["k"], assignment=folds_data["assignment"])
    if not (0 <= args.hold_out < folds.k):
        raise ValidationError(f"--hold-out {args.hold_out} outside [0, {folds.k})")
    overrides = json.loads(args.config_overrides) if args.config_overrides else {}
    out_dir = Path(args.out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    manifest_path = training.emit_manifest(
        manifest, folds, args.hold_out, out_dir / "train_manifest.jsonl", variant=_variant(args.stem_variant)
    )
    training.emit_config(overrides, out_dir / "train_config.json", manifest_path=manifest_path)
    print(f"wrote {manifest_path}")
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="csforge", description=__doc__)
    parser.add_argument("--version", action="version", version=f"csforge {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("analyze", help="corpus CMI statistics")
    p.add_argument("--input", required=True)
    p.add_argument("--report", required=True)
    p.add_argument("--seed", type=int, default=0)
    p.set_defaults(func=cmd_analyze)

    p = sub.add_parser("generate", help="code-switch question stems under a CMI bucket")
    p.add_argument("--input", required=True)
    p.add_argument("--bucket", required=True, choices=["low", "medium", "high"])
    p.add_argument("--generator", default="lexicon", choices=["lexicon", "endpoint"])
    p.add_argument("--lexicon")
    p.add_argument("--endpoint")
    p.add_argument("--model", default="default")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--max-attempts", type=int, default=8)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_generate)

    p = sub.add_parser("split", help="k-fold split into fold files")
    p.add_argument("--input", required=True)
    p.add_argument("--k", type=int, default=5)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out-dir", required=True)
    p.set_defaults(func=cmd_split)

    p = sub.add_parser("evaluate", help="majority-vote evaluation of one fold")
    p.add_argument("--dataset", required=True)
    p.add_argument("--variant", default="english", choices=["english", "codeswitched", "hindi"])
    p.add_argument("--endpoint")
    p.add_argument("--mock", choices=["correct", "incorrect", "seeded"])
    p.add_argument("--model", default="default")
    p.add_argument("--samples", type=int, default=ev.DEFAULT_N_SAMPLES)
    p.add_argument("--temperature", type=float, default=ev.DEFAULT_TEMPERATURE)
    p.add_argument("--max-tokens", type=int, default=ev.DEFAULT_MAX_TOKENS)
    p.add_argument("--fold", type=int, default=0)
    p.add_argument("--config-name", default="run")
    p.add_argument("--records")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_evaluate)

    p = sub.add_parser("report", help="aggregate fold results into a summary table")
    p.add_argument("--results-dir", required=True)
    p.add_argument("--format", default="both", choices=["csv", "markdown", "both"])
    p.add_argument("--out-dir", required=True)
    p.add_argument("--seed", type=int, default=0)
    p.set_defaults(func=cmd_report)

    p = sub.add_parser("qa-sample", help="sample one item per review batch")
    p.add_argument("--input", required=True)
    p.add_argument("--every", type=int, default=50)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_qa_sample)

    p = sub.add_parser("emit-train", help="emit fine-tuning manifest and config")
    p.add_argument("--input", required=True)
    p.add_argument("--folds", required=True)
    p.add_argument("--hold-out", type=int, required=True)
    p.add_argument("--config-overrides", help="JSON object of TrainConfig overrides")
    p.add_argument("--stem-variant", default="codeswitched", choices=["english", "codeswitched", "hindi"])
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out-dir", required=True)
    p.set_defaults(func=cmd_emit_train)

    return parser


def _run_manifest_path(args) -> Path:
    for attr in ("out", "report", "out_dir"):
        value = getattr(args, attr, None)
        if value:
            target = Path(value)
            if attr == "out_dir":
                return target / "run_manifest.json"
            return Path(str(target) + ".run.json")
    return Path("csforge_run.json")


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    started = time.time()
    status = "ok"
    exit_code = EXIT_OK
    try:
        exit_code = args.func(args)
    except (ValidationError, FileNotFoundError, json.JSONDecodeError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        status = f"error: {exc}"
        exit_code = EXIT_USAGE
    except RuntimeFailure as exc:
        print(f"runtime failure: {exc}", file=sys.stderr)
        status = f"runtime failure: {exc}"
        exit_code = EXIT_RUNTIME
    finally:
        payload = {
            "subcommand": args.command,
            "args": {k: v for k, v in vars(args).items() if k != "func"},
            "seed": getattr(args, "seed", None),
            "tool_version": __version__,
            "duration_s": round(time.time() - started, 3),
            "status": status,
            "exit_code": exit_code,
        }
        try:
            _write_run_manifest(_run_manifest_path(args), payload)
        except OSError:
            pass
    return exit_code


if __name__ == "__main__":
    sys.exit(main())
