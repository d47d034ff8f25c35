"""
Result file writers.

Every command's outputs go through ReportGenerator: key-value metric reports,
per-label tables, ROC point files, training curves, cross-validation and
sweep tables, resampling counts and explanations. Files carry no timestamps,
so identical runs produce byte-identical files.
"""

import json
import logging
import math
from pathlib import Path
from typing import Dict, List, Mapping, Optional, Sequence

import pandas as pd
from jinja2 import Template
from tabulate import tabulate

from src.evaluation.metrics import SUMMARY_COLUMNS, MetricsReport, summary_row
from src.explain.lime_explainer import Explanation
from src.training.trainer import EpochRecord, curve_rows

logger = logging.getLogger(__name__)

FLOAT_FORMAT = "%.6f"
CURVE_COLUMNS = ("epoch", "train_loss", "val_loss", "val_acc", "train_acc")

MARKDOWN_TEMPLATE = Template("""# Evaluation Report: {{ title }}

**Examples:** {{ report.n_examples }}
**Threshold:** {{ fmt(report.threshold) }}
**Averaging:** {{ report.averaging_mode }}

## Summary

| Metric | Value |
|--------|-------|
{% for name, value in summary.items() -%}
| {{ name }} | {{ fmt(value) }} |
{% endfor %}
| Subset Accuracy | {{ fmt(report.subset_accuracy) }} |
| Micro F1 | {{ fmt(report.micro_f1) }} |

## Per-Label Results

| Label | Precision | Recall | F1 | AUC | TP | FP | FN | TN |
|-------|-----------|--------|----|-----|----|----|----|----|
{% for label, m in report.per_label.items() -%}
| {{ label }} | {{ fmt(m.precision) }} | {{ fmt(m.recall) }} | {{ fmt(m.f1) }} | {{ fmt(m.auc) }} | {{ m.tp }} | {{ m.fp }} | {{ m.fn }} | {{ m.tn }} |
{% endfor %}
{% if report.flags %}
## Notes

{% for flag in report.flags -%}
- {{ flag }}
{% endfor %}
{% endif %}
""")


def fmt(value: float) -> str:
    """Fixed six-decimal rendering; undefined values print as `nan`."""
    if value is None or (isinstance(value, float) and math.isnan(value)):
        return "nan"
    return f"{value:.6f}"


def _write_text(path: Path, text: str) -> Path:
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", encoding="utf-8", newline="\n") as f:
        f.write(text)
    return path


def _write_tsv(frame: pd.DataFrame, path: Path) -> Path:
    path.parent.mkdir(parents=True, exist_ok=True)
    frame.to_csv(path, sep="\t", index=False, float_format=FLOAT_FORMAT, lineterminator="\n", na_rep="nan")
    return path


def metrics_text(report: MetricsReport, title: str = "evaluation") -> str:
    """Key-value headline block followed by the per-label table."""
    lines = [f"report: {title}", f"n_examples: {report.n_examples}",
             f"threshold: {fmt(report.threshold)}", f"averaging: {report.averaging_mode}"]
    for name, value in report.headline().items():
        lines.append(f"{name}: {fmt(value)}")
        if name in report.std:
            lines.append(f"{name}_std: {fmt(report.std[name])}")

    rows = [
        [label, fmt(m.accuracy), fmt(m.precision), fmt(m.recall), fmt(m.f1),
         fmt(m.mcc), fmt(m.kappa), fmt(m.auc), m.tp, m.fp, m.fn, m.tn]
        for label, m in report.per_label.items()
    ]
    headers = ["label", "accuracy", "precision", "recall", "f1", "mcc", "kappa", "auc", "tp", "fp", "fn", "tn"]
    table = tabulate(rows, headers=headers, tablefmt="simple", disable_numparse=True)
    text = "\n".join(lines) + "\n\n" + table + "\n"
    if report.flags:
        text += "\nflags:\n" + "".join(f"  - {flag}\n" for flag in report.flags)
    return text


class ReportGenerator:
    """Writes result files under one output directory."""

    def __init__(self, output_dir: Path):
        self.output_dir = Path(output_dir)

    def _path(self, name: str) -> Path:
        return self.output_dir / name

    def write_metrics(self, report: MetricsReport, stem: str = "metrics", title: Optional[str] = None) -> Dict[str, Path]:
        """
        Metrics report as text, JSON and markdown, plus ROC point files.

        Returns:
            Mapping of artifact kind to written path
        """
        title = title or stem
        written = {
            "text": _write_text(self._path(f"{stem}.txt"), metrics_text(report, title)),
            "json": _write_text(
                self._path(f"{stem}.json"),
                json.dumps(report.to_dict(), indent=2, sort_keys=True, allow_nan=True) + "\n",
            ),
            "markdown": _write_text(
                self._path(f"{stem}.md"),
                MARKDOWN_TEMPLATE.render(title=title, report=report, summary=summary_row(report), fmt=fmt),
            ),
        }
        for curve in report.roc:
            if not curve.defined:
                continue
            frame = pd.DataFrame({"fpr": curve.fpr, "tpr": curve.tpr})
            written[f"roc_{curve.label}"] = _write_tsv(frame, self._path(f"roc/{stem}_{curve.label}.tsv"))
        logger.debug(f"wrote {len(written)} metric artifacts for {stem}")
        return written

    def write_curve(self, curve: Sequence[EpochRecord], name: str = "curve.tsv") -> Path:
        """Per-epoch train/validation loss and labelwise accuracy (header only when empty)."""
        rows = curve_rows(curve)
        frame = pd.DataFrame(
            [
                {
                    "epoch": r["epoch"],
                    "train_loss": r["train_loss"],
                    "val_loss": r["val_loss"],
                    "val_acc": r["val_accuracy"],
                    "train_acc": r["train_accuracy"],
                }
                for r in rows
            ],
            columns=list(CURVE_COLUMNS),
        )
        return _write_tsv(frame, self._path(name))

    def write_crossval(self, per_fold: Sequence[MetricsReport], aggregate: MetricsReport) -> Dict[str, Path]:
        """
        Per-fold rows, an Average row and a Std row over the summary columns.

        Each fold's full report is also written under `fold_<i>/`.
        """
        titles = [title for title, _ in SUMMARY_COLUMNS]
        rows = []
        for i, report in enumerate(per_fold, 1):
            rows.append({"Fold": f"Fold {i}", **summary_row(report)})
        rows.append({"Fold": "Average", **summary_row(aggregate)})
        rows.append({"Fold": "Std", **{title: aggregate.std.get(attr, float("nan")) for title, attr in SUMMARY_COLUMNS}})
        frame = pd.DataFrame(rows, columns=["Fold"] + titles)

        table = tabulate(
            [[row["Fold"]] + [fmt(row[t]) for t in titles] for row in rows],
            headers=["Fold"] + titles,
            tablefmt="simple",
            disable_numparse=True,
        )
        written = {
            "table": _write_text(self._path("crossval.txt"), table + "\n"),
            "tsv": _write_tsv(frame, self._path("crossval.tsv")),
        }
        for i, report in enumerate(per_fold, 1):
            sub = ReportGenerator(self.output_dir / f"fold_{i}")
            written[f"fold_{i}"] = sub.write_metrics(report, title=f"fold {i}")["text"]
        written["average"] = self.write_metrics(aggregate, stem="crossval_average", title="cross-validation average")["text"]
        return written

    def write_resample_counts(self, rows: Sequence[Mapping], name: str = "resample_counts.txt") -> Dict[str, Path]:
        """Before/after label counts, one row per split variant."""
        frame = pd.DataFrame(list(rows))
        table = tabulate(frame.values.tolist(), headers=list(frame.columns), tablefmt="simple")
        return {
            "table": _write_text(self._path(name), table + "\n"),
            "tsv": _write_tsv(frame, self._path(Path(name).with_suffix(".tsv").name)),
        }

    def write_explanations(self, text: str, explanations: Sequence[Explanation]) -> Dict[str, Path]:
        """
        One text block per label plus a token/weight TSV per label.

        Token files list weights in the surrogate's ranking order (largest
        magnitude first) so a renderer can highlight without re-sorting.
        """
        blocks = [f"text: {text}"]
        written: Dict[str, Path] = {}
        for exp in explanations:
            lines = [
                f"label: {exp.label}",
                f"probability: {fmt(exp.base_probability)}",
                f"perturbations: {exp.n_perturbations}",
                f"surrogate_r2: {fmt(exp.score)}",
                f"intercept: {fmt(exp.intercept)}",
            ]
            lines += [f"  {token}\t{weight:+.6f}" for token, weight in exp.weighted_tokens]
            lines += [f"  note: {flag}" for flag in exp.flags]
            blocks.append("\n".join(lines))
            frame = pd.DataFrame(exp.weighted_tokens, columns=["token", "weight"])
            written[exp.label] = _write_tsv(frame, self._path(f"explanation_{exp.label}.tsv"))
        written["text"] = _write_text(self._path("explanation.txt"), "\n\n".join(blocks) + "\n")
        return written

    def write_sweep(self, rows: Sequence[Mapping], name: str = "sweep") -> Dict[str, Path]:
        """Comparison table: one row per varied value with Train/Val/Test accuracy and summary columns."""
        frame = pd.DataFrame(list(rows))
        display = [[fmt(v) if isinstance(v, float) else v for v in row] for row in frame.values.tolist()]
        table = tabulate(display, headers=list(frame.columns), tablefmt="simple", disable_numparse=True)
        return {
            "table": _write_text(self._path(f"{name}.txt"), table + "\n"),
            "tsv": _write_tsv(frame, self._path(f"{name}.tsv")),
        }

    def write_json(self, data: Mapping, name: str) -> Path:
        return _write_text(self._path(name), json.dumps(data, indent=2, sort_keys=True) + "\n")


def summary_table_rows(reports: Mapping[str, MetricsReport]) -> List[List[str]]:
    """Rows for console tables: name followed by the summary columns."""
    return [[name] + [fmt(v) for v in summary_row(r).values()] for name, r in reports.items()]
