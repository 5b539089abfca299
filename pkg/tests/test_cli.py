import csv
import json

import pytest

from conftest import make_manifest, synthetic_lexicon, write_csqa_jsonl
from csforge.cli import main


def run(argv):
    try:
        return main(argv)
    except SystemExit as exc:  # argparse usage errors
        return exc.code


@pytest.fixture()
def dataset_path(tmp_path):
    path = tmp_path / "data.jsonl"
    write_csqa_jsonl(path, make_manifest(50))
    return path


@pytest.fixture()
def lexicon_path(tmp_path):
    lex = synthetic_lexicon()
    path = tmp_path / "lexicon.tsv"
    with open(path, "w", encoding="utf-8") as fh:
        for en, hi in sorted(lex.entries.items()):
            fh.write(f"{en}\t{hi}\n")
    return path


class TestAnalyze:
    def test_empty_input(self, tmp_path):
        inp = tmp_path / "empty.jsonl"
        inp.write_text("", encoding="utf-8")
        report = tmp_path / "report.json"
        assert run(["analyze", "--input", str(inp), "--report", str(report)]) == 0
        data = json.loads(report.read_text(encoding="utf-8"))
        assert data["n_utterances"] == 0
        assert data["mean_cmi"] == 0.0

    def test_malformed_line_exits_2(self, tmp_path, capsys):
        inp = tmp_path / "bad.jsonl"
        inp.write_text("{not json\n", encoding="utf-8")
        report = tmp_path / "report.json"
        assert run(["analyze", "--input", str(inp), "--report", str(report)]) == 2
        assert "line 1" in capsys.readouterr().err

    def test_missing_file_exits_2(self, tmp_path):
        assert run(["analyze", "--input", str(tmp_path / "nope.jsonl"), "--report", str(tmp_path / "r.json")]) == 2

    def test_mean_matches_recomputation(self, dataset_path, tmp_path):
        report = tmp_path / "report.json"
        assert run(["analyze", "--input", str(dataset_path), "--report", str(report)]) == 0
        data = json.loads(report.read_text(encoding="utf-8"))
        assert data["n_utterances"] == 50
        mean = sum(item["cmi"] for item in data["items"]) / 50
        assert data["mean_cmi"] == pytest.approx(mean, abs=0.05)


class TestGenerate:
    def test_medium_bucket(self, dataset_path, lexicon_path, tmp_path):
        out = tmp_path / "cs.jsonl"
        code = run(
            ["generate", "--input", str(dataset_path), "--bucket", "medium",
             "--lexicon", str(lexicon_path), "--seed", "1", "--out", str(out)]
        )
        assert code == 0
        rows = [json.loads(line) for line in out.read_text(encoding="utf-8").splitlines()]
        items = [r for r in rows if r["id"] != "__manifest__"]
        assert items
        assert all(r["bucket"] == "medium" for r in items)
        # independent re-measure
        from csforge.cmi import bucket_of, compute_cmi
        from csforge.langid import tag_utterance

        for r in items:
            assert bucket_of(compute_cmi(tag_utterance(r["cs_stem"])).cmi_percent).value == "medium"

    def test_unknown_bucket_exits_2(self, dataset_path, lexicon_path, tmp_path):
        code = run(
            ["generate", "--input", str(dataset_path), "--bucket", "extreme",
             "--lexicon", str(lexicon_path), "--out", str(tmp_path / "x.jsonl")]
        )
        assert code == 2

    def test_same_seed_identical_outputs(self, dataset_path, lexicon_path, tmp_path, monkeypatch):
        monkeypatch.setenv("SOURCE_DATE_EPOCH", "1700000000")
        out1 = tmp_path / "a.jsonl"
        out2 = tmp_path / "b.jsonl"
        for out in (out1, out2):
            assert run(
                ["generate", "--input", str(dataset_path), "--bucket", "high",
                 "--lexicon", str(lexicon_path), "--seed", "5", "--out", str(out)]
            ) == 0
        assert out1.read_bytes() == out2.read_bytes()

    def test_missing_lexicon_flag_exits_2(self, dataset_path, tmp_path):
        code = run(["generate", "--input", str(dataset_path), "--bucket", "low", "--out", str(tmp_path / "x.jsonl")])
        assert code == 2


class TestSplit:
    def test_five_folds_of_50(self, tmp_path):
        inp = tmp_path / "d.jsonl"
        write_csqa_jsonl(inp, make_manifest(250))
        out_dir = tmp_path / "folds"
        assert run(["split", "--input", str(inp), "--k", "5", "--seed", "0", "--out-dir", str(out_dir)]) == 0
        for i in range(5):
            lines = (out_dir / f"fold_{i}.jsonl").read_text(encoding="utf-8").splitlines()
            assert len([l for l in lines if '"__manifest__"' not in l]) == 50
        assignment = json.loads((out_dir / "folds.json").read_text(encoding="utf-8"))
        assert assignment["k"] == 5

    def test_k_greater_than_n_exits_2(self, tmp_path):
        inp = tmp_path / "d.jsonl"
        write_csqa_jsonl(inp, make_manifest(3))
        assert run(["split", "--input", str(inp), "--k", "5", "--out-dir", str(tmp_path / "f")]) == 2

    def test_deterministic(self, tmp_path, monkeypatch):
        monkeypatch.setenv("SOURCE_DATE_EPOCH", "1700000000")
        inp = tmp_path / "d.jsonl"
        write_csqa_jsonl(inp, make_manifest(25))
        d1, d2 = tmp_path / "f1", tmp_path / "f2"
        for d in (d1, d2):
            assert run(["split", "--input", str(inp), "--k", "5", "--seed", "3", "--out-dir", str(d)]) == 0
        for i in range(5):
            assert (d1 / f"fold_{i}.jsonl").read_bytes() == (d2 / f"fold_{i}.jsonl").read_bytes()


class TestEvaluate:
    def test_mock_correct_accuracy_1(self, dataset_path, tmp_path):
        out = tmp_path / "results.csv"
        assert run(["evaluate", "--dataset", str(dataset_path), "--mock", "correct", "--out", str(out)]) == 0
        with open(out, newline="", encoding="utf-8") as fh:
            (row,) = list(csv.DictReader(fh))
        assert float(row["accuracy"]) == 1.0
        assert row["n_items"] == "50"

    def test_default_samples_is_5(self, dataset_path, tmp_path):
        out = tmp_path / "results.csv"
        assert run(["evaluate", "--dataset", str(dataset_path), "--mock", "correct", "--out", str(out)]) == 0
        records = [json.loads(l) for l in (tmp_path / "results.csv.records.jsonl").read_text(encoding="utf-8").splitlines()]
        assert all(len(r["raw_completions"]) == 5 for r in records)

    def test_missing_endpoint_and_mock_exits_2(self, dataset_path, tmp_path):
        assert run(["evaluate", "--dataset", str(dataset_path), "--out", str(tmp_path / "r.csv")]) == 2


class TestReport:
    def _write_results(self, path, config, language, accs):
        with open(path, "w", encoding="utf-8", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow(["config", "language", "fold", "n_items", "n_correct", "accuracy"])
            for i, acc in enumerate(accs):
                writer.writerow([config, language, i, 50, round(acc / 2), f"{acc / 100:.6f}"])

    def test_gptgen_cells(self, tmp_path):
        results = tmp_path / "results"
        results.mkdir()
        self._write_results(results / "en.csv", "GPTgen", "English", [92, 82, 94, 82, 94])
        self._write_results(results / "hi.csv", "GPTgen", "Hindi", [62, 78, 92, 74, 92])
        out_dir = tmp_path / "report"
        assert run(["report", "--results-dir", str(results), "--out-dir", str(out_dir)]) == 0
        with open(out_dir / "summary.csv", newline="", encoding="utf-8") as fh:
            rows = {(r["config"], r["language"]): r for r in csv.DictReader(fh)}
        assert rows[("GPTgen", "English")]["mean_accuracy"] == "88.80"
        assert rows[("GPTgen", "English")]["std_dev"] == "6.26"
        assert rows[("GPTgen", "Hindi")]["mean_accuracy"] == "79.60"
        assert rows[("GPTgen", "Hindi")]["std_dev"] == "12.76"
        md = (out_dir / "summary.md").read_text(encoding="utf-8")
        for value in ("88.80", "6.26", "79.60", "12.76"):
            assert value in md

    def test_empty_dir_exits_2(self, tmp_path):
        empty = tmp_path / "none"
        empty.mkdir()
        assert run(["report", "--results-dir", str(empty), "--out-dir", str(tmp_path / "r")]) == 2


class TestQaSample:
    def test_1200_items_24_rows(self, tmp_path):
        inp = tmp_path / "d.jsonl"
        write_csqa_jsonl(inp, make_manifest(1200))
        out = tmp_path / "review.csv"
        assert run(["qa-sample", "--input", str(inp), "--every", "50", "--out", str(out)]) == 0
        with open(out, newline="", encoding="utf-8") as fh:
            assert len(list(csv.DictReader(fh))) == 24

    def test_every_1_samples_all(self, dataset_path, tmp_path):
        out = tmp_path / "review.csv"
        assert run(["qa-sample", "--input", str(dataset_path), "--every", "1", "--out", str(out)]) == 0
        with open(out, newline="", encoding="utf-8") as fh:
            assert len(list(csv.DictReader(fh))) == 50

    def test_deterministic(self, dataset_path, tmp_path):
        out1, out2 = tmp_path / "r1.csv", tmp_path / "r2.csv"
        for out in (out1, out2):
            assert run(["qa-sample", "--input", str(dataset_path), "--every", "10", "--seed", "4", "--out", str(out)]) == 0
        assert out1.read_bytes() == out2.read_bytes()


class TestEmitTrain:
    def _split(self, tmp_path, n=250):
        inp = tmp_path / "d.jsonl"
        write_csqa_jsonl(inp, make_manifest(n))
        out_dir = tmp_path / "folds"
        assert run(["split", "--input", str(inp), "--k", "5", "--seed", "0", "--out-dir", str(out_dir)]) == 0
        return inp, out_dir / "folds.json"

    def test_defaults_match_expected_config(self, tmp_path):
        inp, folds = self._split(tmp_path)
        out_dir = tmp_path / "train"
        code = run(
            ["emit-train", "--input", str(inp), "--folds", str(folds), "--hold-out", "0",
             "--stem-variant", "english", "--out-dir", str(out_dir)]
        )
        assert code == 0
        config = json.loads((out_dir / "train_config.json").read_text(encoding="utf-8"))
        assert config["epochs"] == 5
        assert config["learning_rate"] == 3e-5
        assert config["batch_size"] == 32
        assert config["optimizer"] == "adam"
        assert config["peft_method"] == "qlora"

    def test_no_leakage(self, tmp_path):
        inp, folds_path = self._split(tmp_path)
        out_dir = tmp_path / "train"
        assert run(
            ["emit-train", "--input", str(inp), "--folds", str(folds_path), "--hold-out", "1",
             "--stem-variant", "english", "--out-dir", str(out_dir)]
        ) == 0
        folds = json.loads(folds_path.read_text(encoding="utf-8"))
        held = {i for i, f in folds["assignment"].items() if f == 1}
        lines = (out_dir / "train_manifest.jsonl").read_text(encoding="utf-8").splitlines()
        assert len(lines) == 250 - len(held)

    def test_bad_fold_index_exits_2(self, tmp_path):
        inp, folds = self._split(tmp_path)
        assert run(
            ["emit-train", "--input", str(inp), "--folds", str(folds), "--hold-out", "9",
             "--out-dir", str(tmp_path / "t")]
        ) == 2


class TestRunManifest:
    def test_written_on_success(self, dataset_path, tmp_path):
        report = tmp_path / "r.json"
        assert run(["analyze", "--input", str(dataset_path), "--report", str(report)]) == 0
        manifest = json.loads((tmp_path / "r.json.run.json").read_text(encoding="utf-8"))
        assert manifest["subcommand"] == "analyze"
        assert manifest["exit_code"] == 0

    def test_written_on_failure(self, tmp_path):
        report = tmp_path / "r.json"
        assert run(["analyze", "--input", str(tmp_path / "nope.jsonl"), "--report", str(report)]) == 2
        manifest = json.loads((tmp_path / "r.json.run.json").read_text(encoding="utf-8"))
        assert manifest["exit_code"] == 2
