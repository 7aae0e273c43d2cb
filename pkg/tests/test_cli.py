import csv
import json
from pathlib import Path

import pytest
from click.testing import CliRunner

from tensioncorpus.cli import main
from tensioncorpus.store import load_corpus

FIXTURE = Path(__file__).parent / "fixtures" / "WHC-35Ord.txt"


@pytest.fixture()
def runner():
    return CliRunner()


def run_ok(runner, args):
    result = runner.invoke(main, args, catch_exceptions=False)
    assert result.exit_code == 0, result.output
    return json.loads(result.output.strip().splitlines()[-1])


def build_store(runner, root):
    store = str(root / "store")
    run_ok(runner, ["ingest", str(FIXTURE), "--out", store])
    run_ok(runner, ["embed", "--store", store, "--dimension", "64"])
    return store


def write_labels(store, path, n=24):
    corpus = load_corpus(store)
    rows = []
    for pid in sorted(corpus.paragraphs)[:n]:
        text = corpus.paragraphs[pid].clean_text
        value = 1 if ("concern" in text or "objected" in text) else 0
        for annotator in ("a1", "a2"):
            rows.append(
                dict(
                    paragraph_id=pid,
                    annotator_id=annotator,
                    value=value,
                    stage="Initial",
                    timestamp="",
                )
            )
    with open(path, "w", newline="") as handle:
        writer = csv.DictWriter(
            handle,
            fieldnames=["paragraph_id", "annotator_id", "value", "stage", "timestamp"],
        )
        writer.writeheader()
        writer.writerows(rows)


class TestIngestAndStats:
    def test_ingest_builds_store(self, runner, tmp_path):
        store = build_store(runner, tmp_path)
        stats = run_ok(runner, ["stats", "--store", store])
        assert stats["sessions"] == 1 and stats["paragraphs"] == 30

    def test_speaker_coverage_stats(self, runner, tmp_path):
        store = build_store(runner, tmp_path)
        rows = run_ok(runner, ["stats", "--store", store, "--speakers"])
        assert rows[0]["session"] == "WHC-35"
        assert rows[0]["speaker_coverage"] >= 0.7

    def test_bad_filename_is_domain_error(self, runner, tmp_path):
        bad = tmp_path / "meeting-notes.txt"
        bad.write_text("Some text.")
        result = runner.invoke(
            main, ["ingest", str(bad), "--out", str(tmp_path / "s")]
        )
        assert result.exit_code == 1

    def test_missing_required_option_is_usage_error(self, runner):
        result = runner.invoke(main, ["ingest", str(FIXTURE)])
        assert result.exit_code == 2


class TestTopics:
    def test_topics_assignment(self, runner, tmp_path):
        store = build_store(runner, tmp_path)
        out = run_ok(runner, ["topics", "--store", store, "--k", "3", "--seed", "0"])
        assert out["topics"] == 3
        corpus = load_corpus(store)
        assert len(corpus.topics) == 3
        assigned = [p for p in corpus.paragraphs.values() if p.topic_id is not None]
        assert len(assigned) == out["clustered"]

    def test_k_too_large_is_domain_error(self, runner, tmp_path):
        store = build_store(runner, tmp_path)
        result = runner.invoke(main, ["topics", "--store", store, "--k", "500"])
        assert result.exit_code == 1

    def test_topics_without_embeddings_fails(self, runner, tmp_path):
        store = str(tmp_path / "store")
        run_ok(runner, ["ingest", str(FIXTURE), "--out", store])
        result = runner.invoke(main, ["topics", "--store", store, "--k", "2"])
        assert result.exit_code == 1


class TestTrainEvalAl:
    def test_full_loop(self, runner, tmp_path):
        store = build_store(runner, tmp_path)
        labels = tmp_path / "labels.csv"
        write_labels(store, labels)

        imported = run_ok(runner, ["al-import", str(labels), "--store", store])
        assert imported["kappa"] == {"a1|a2": 1.0}

        trained = run_ok(
            runner,
            [
                "train", "--store", store, "--seed", "0", "--epochs", "20",
                "--hidden-dim", "16", "--dropout", "0.0", "--learning-rate", "0.01",
            ],
        )
        assert Path(trained["checkpoint"]).exists()
        assert trained["train_size"] > 0

        evaluated = run_ok(runner, ["eval", "--store", store])
        assert set(evaluated) >= {"precision", "recall", "accuracy"}

        batch = run_ok(runner, ["al-next", "--store", store, "--batch-size", "3"])
        assert len(batch["batch"]) == 3
        labelled = load_corpus(store).labels.labelled_ids()
        assert not set(batch["batch"]) & labelled

    def test_train_without_labels_is_domain_error(self, runner, tmp_path):
        store = build_store(runner, tmp_path)
        result = runner.invoke(main, ["train", "--store", store])
        assert result.exit_code == 1

    def test_eval_without_checkpoint_is_domain_error(self, runner, tmp_path):
        store = build_store(runner, tmp_path)
        labels = tmp_path / "labels.csv"
        write_labels(store, labels)
        run_ok(runner, ["al-import", str(labels), "--store", store])
        result = runner.invoke(main, ["eval", "--store", store])
        assert result.exit_code == 1


class TestExport:
    def test_report_tables(self, runner, tmp_path):
        store = build_store(runner, tmp_path)
        labels = tmp_path / "labels.csv"
        write_labels(store, labels)
        run_ok(runner, ["al-import", str(labels), "--store", store])
        out = run_ok(
            runner, ["export", "--store", store, "--out", str(tmp_path / "report")]
        )
        paths = {Path(p).name for p in out["files"]}
        assert paths == {"speaker_coverage.csv", "class_balance.csv"}
        with open(tmp_path / "report" / "class_balance.csv") as handle:
            rows = list(csv.DictReader(handle))
        assert rows[0]["session"] == "WHC-35"
        assert int(rows[0]["total"]) == 24

    def test_text_format(self, runner, tmp_path):
        store = build_store(runner, tmp_path)
        out = run_ok(
            runner,
            ["export", "--store", store, "--format", "text", "--out", str(tmp_path / "r")],
        )
        assert all(p.endswith(".txt") for p in out["files"])

    def test_empty_store_is_domain_error(self, runner, tmp_path):
        empty = tmp_path / "empty"
        empty.mkdir()
        result = runner.invoke(
            main, ["export", "--store", str(empty), "--out", str(tmp_path / "r")]
        )
        assert result.exit_code == 1
