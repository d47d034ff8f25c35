"""Tests for the result file writers."""

import json

import pytest

from src.evaluation import crossval_aggregate, evaluate_predictions
from src.explain.lime_explainer import Explanation
from src.reporters import ReportGenerator, metrics_text, summary_table_rows
from src.reporters.report_generator import fmt
from src.training.trainer import EpochRecord


@pytest.fixture
def report(rng):
    Y = rng.integers(0, 2, size=(20, 5))
    Y[:, 4] = 0
    return evaluate_predictions(Y, rng.random((20, 5)))


def test_fmt():
    assert fmt(0.5) == "0.500000"
    assert fmt(float("nan")) == "nan"
    assert fmt(None) == "nan"


def test_metrics_files(report, tmp_path):
    written = ReportGenerator(tmp_path).write_metrics(report, stem="metrics", title="test split")
    text = (tmp_path / "metrics.txt").read_text(encoding="utf-8")
    assert text.startswith("report: test split\nn_examples: 20\n")
    assert "accuracy: " in text and "kappa: " in text
    assert "spam: only one class present" in text

    data = json.loads((tmp_path / "metrics.json").read_text(encoding="utf-8"))
    assert data["n_examples"] == 20
    assert set(data["per_label"]) == {"bully", "sexual", "religious", "threat", "spam"}

    markdown = (tmp_path / "metrics.md").read_text(encoding="utf-8")
    assert "| bully |" in markdown
    assert "## Notes" in markdown

    assert "roc_bully" in written and "roc_spam" not in written
    roc = (tmp_path / "roc" / "metrics_bully.tsv").read_text(encoding="utf-8").splitlines()
    assert roc[0] == "fpr\ttpr"
    assert roc[1] == "0.000000\t0.000000"


def test_metrics_files_are_reproducible(report, tmp_path):
    ReportGenerator(tmp_path / "a").write_metrics(report)
    ReportGenerator(tmp_path / "b").write_metrics(report)
    for name in ("metrics.txt", "metrics.json", "metrics.md", "roc/metrics_threat.tsv"):
        assert (tmp_path / "a" / name).read_bytes() == (tmp_path / "b" / name).read_bytes()


def test_curve_file(tmp_path):
    reporter = ReportGenerator(tmp_path)
    empty = reporter.write_curve([], name="empty.tsv")
    assert empty.read_text(encoding="utf-8") == "epoch\ttrain_loss\tval_loss\tval_acc\ttrain_acc\n"
    curve = [EpochRecord(1, 0.7, 0.6, 0.8, 0.75, 1e-5), EpochRecord(2, 0.5, float("nan"), 0.85, 0.9, 0.0)]
    lines = reporter.write_curve(curve).read_text(encoding="utf-8").splitlines()
    assert lines[1] == "1\t0.700000\t0.600000\t0.800000\t0.750000"
    assert lines[2] == "2\t0.500000\tnan\t0.850000\t0.900000"


def test_crossval_files(report, tmp_path):
    aggregate = crossval_aggregate([report, report])
    ReportGenerator(tmp_path).write_crossval([report, report], aggregate)
    table = (tmp_path / "crossval.txt").read_text(encoding="utf-8")
    for row in ("Fold 1", "Fold 2", "Average", "Std"):
        assert row in table
    tsv = (tmp_path / "crossval.tsv").read_text(encoding="utf-8").splitlines()
    assert tsv[0] == "Fold\tAccuracy\tHamming Loss\tPrecision\tRecall\tF1\tMCC\tKappa\tAUC"
    assert len(tsv) == 5
    assert (tmp_path / "fold_1" / "metrics.txt").exists()
    assert "accuracy_std: 0.000000" in (tmp_path / "crossval_average.txt").read_text(encoding="utf-8")


def test_explanation_files(tmp_path):
    explanation = Explanation("bully", 0.8, [("idiot", 0.5), ("you", -0.1)], 4, 0.99)
    ReportGenerator(tmp_path).write_explanations("you idiot", [explanation])
    text = (tmp_path / "explanation.txt").read_text(encoding="utf-8")
    assert "label: bully" in text
    assert "  idiot\t+0.500000" in text
    tsv = (tmp_path / "explanation_bully.tsv").read_text(encoding="utf-8").splitlines()
    assert tsv == ["token\tweight", "idiot\t0.500000", "you\t-0.100000"]


def test_resample_and_sweep_tables(tmp_path):
    reporter = ReportGenerator(tmp_path)
    rows = [{"split": "Imbalance", "bully": 5, "examples": 9}, {"split": "Oversampled", "bully": 8, "examples": 14}]
    paths = reporter.write_resample_counts(rows)
    assert "Oversampled" in paths["table"].read_text(encoding="utf-8")
    assert paths["tsv"].name == "resample_counts.tsv"

    sweep = reporter.write_sweep([{"lr": 1e-5, "Test Acc": 0.9}, {"lr": 1e-4, "Test Acc": 0.95}], name="sweep_lr")
    assert "0.950000" in sweep["table"].read_text(encoding="utf-8")


def test_summary_table_rows(report):
    rows = summary_table_rows({"test": report})
    assert rows[0][0] == "test"
    assert len(rows[0]) == 9
    assert metrics_text(report).count("\n") > 15
