"""
ExperimentRunner orchestrates the commands: data loading, resampling,
training, evaluation, cross-validation, explanation and sweeps.
"""

import copy
import logging
from dataclasses import dataclass
from pathlib import Path
from typing import Any, Dict, List, Optional, Sequence, Tuple

import numpy as np
from joblib import Parallel, delayed
from rich.console import Console
from rich.markup import escape
from rich.table import Table

from src.config import RunConfig
from src.data.dataset import DatasetSplit, LabeledExample, load_dataset, read_provenance, split_dataset, write_dataset
from src.data.sampling import class_counts, kfold_partition, provenance_for, resample, resampling_table
from src.evaluation.metrics import SUMMARY_COLUMNS, MetricsReport, crossval_aggregate, evaluate_predictions, summary_row
from src.exceptions import ConfigError
from src.explain.lime_explainer import Explanation, explain_comment
from src.models.checkpoint import load_checkpoint_with_vocab, save_checkpoint
from src.models.hybrid import HybridModel, model_config_from_settings
from src.reporters.report_generator import ReportGenerator, fmt, summary_table_rows
from src.rng import RngStreams
from src.text.cleaning import CleaningConfig, clean, load_cleaning_config
from src.text.tokenizer import SubwordTokenizer, encode_batch
from src.text.vocabulary import Vocabulary, build_vocab
from src.training.trainer import Trainer, TrainingResult, encode_examples

console = Console()
logger = logging.getLogger(__name__)

REPO_ROOT = Path(__file__).resolve().parent.parent
CHECKPOINT_NAME = "model.ckpt"
SWEEP_SETTINGS = {"sampling": ("sampling", "mode"), "lr": ("optimizer", "lr")}


def _phase(n: int, total: int, text: str) -> None:
    console.print(f"\n[bold cyan]{escape(f'[Phase {n}/{total}]')}[/bold cyan] {escape(text)}")


def _ok(text: str) -> None:
    console.print(f"  [green]✓[/green] {escape(text)}")


@dataclass
class TrainedModel:
    model: HybridModel
    vocab: Vocabulary
    result: TrainingResult


class ExperimentRunner:
    """
    Runs one command under a resolved RunConfig.

    Components read their own config section; randomness comes from one
    RngStreams built from the run seed.
    """

    def __init__(self, config: RunConfig, show_progress: bool = True):
        """
        Args:
            config: Resolved run configuration
            show_progress: Render training progress bars
        """
        self.config = config
        self.show_progress = show_progress
        self.output_dir = config.output_dir
        self.reporter = ReportGenerator(self.output_dir)
        self._cleaning: Optional[CleaningConfig] = None

    # ------------------------------------------------------------------ helpers

    @property
    def cleaning(self) -> CleaningConfig:
        if self._cleaning is None:
            self._cleaning = load_cleaning_config(self.config.section("cleaning"), REPO_ROOT)
        return self._cleaning

    def load_splits(self, streams: RngStreams) -> DatasetSplit:
        """
        Explicit split files when a training file is configured, otherwise a
        stratified split of the single dataset file.

        Raises:
            ConfigError: If no dataset is configured
        """
        data = self.config.section("data")
        if data.get("train_path"):
            train_path = Path(data["train_path"])
            optional = [Path(p) if p else None for p in (data.get("validation_path"), data.get("test_path"))]
            validation, test = [load_dataset(p) if p else [] for p in optional]
            split = DatasetSplit(load_dataset(train_path), validation, test, provenance=read_provenance(train_path))
            split.check_disjoint()
            return split
        if data.get("path"):
            examples = load_dataset(Path(data["path"]))
            ratios = self.config.get("split", "ratios", [0.8, 0.1, 0.1])
            return split_dataset(examples, ratios, streams.stream("split"))
        raise ConfigError("no dataset configured: pass --dataset or --train-file")

    def all_examples(self) -> List[LabeledExample]:
        """Every configured example, for cross-validation."""
        data = self.config.section("data")
        if data.get("path"):
            return load_dataset(Path(data["path"]))
        paths = [data.get(key) for key in ("train_path", "validation_path", "test_path")]
        if not any(paths):
            raise ConfigError("no dataset configured: pass --dataset or --train-file")
        examples: List[LabeledExample] = []
        for path in paths:
            if path:
                examples.extend(load_dataset(Path(path)))
        return examples

    def build_vocabulary(self, train: Sequence[LabeledExample]) -> Vocabulary:
        tok = self.config.section("tokenizer")
        corpus = [clean(e.text, self.cleaning) for e in train]
        return build_vocab(corpus, int(tok.get("max_vocab_size", 8000)), int(tok.get("min_freq", 1)))

    def fit(
        self,
        train: Sequence[LabeledExample],
        validation: Sequence[LabeledExample],
        streams: RngStreams,
        settings: Optional[Dict[str, Dict[str, Any]]] = None,
        output_dir: Optional[Path] = None,
        vocab_source: Optional[Sequence[LabeledExample]] = None,
        show_progress: Optional[bool] = None,
    ) -> TrainedModel:
        """
        Build vocabulary and model, then train.

        Args:
            train: Training examples (already resampled if requested)
            validation: Validation examples for the best snapshot
            streams: Seeded generators for this run
            settings: Settings to use instead of the run's (for sweeps)
            vocab_source: Examples the vocabulary is built from (defaults to `train`)
        """
        settings = settings if settings is not None else self.config.settings
        vocab = self.build_vocabulary(vocab_source if vocab_source is not None else train)
        model = HybridModel.initialize(model_config_from_settings(settings, len(vocab)), streams.stream("init"))
        model.freeze_bottom_k(int(settings.get("encoder", {}).get("freeze_bottom_k") or 0))

        tokenizer = SubwordTokenizer(vocab)
        max_len = model.config.encoder.max_len
        train_enc = encode_examples(train, tokenizer, max_len, self.cleaning, model.config.n_labels)
        val_enc = encode_examples(validation, tokenizer, max_len, self.cleaning, model.config.n_labels) if validation else None

        trainer = Trainer(
            model,
            streams,
            training=settings.get("training", {}),
            optimizer=settings.get("optimizer", {}),
            output_dir=output_dir,
            show_progress=self.show_progress if show_progress is None else show_progress,
        )
        result = trainer.fit(train_enc, val_enc)
        return TrainedModel(model=model, vocab=vocab, result=result)

    def score(self, model: HybridModel, vocab: Vocabulary, examples: Sequence[LabeledExample],
              averaging: str = "macro") -> MetricsReport:
        """Metrics report of `model` on `examples`."""
        if not examples:
            raise ConfigError("cannot evaluate on an empty split")
        sequences = encode_batch([e.text for e in examples], SubwordTokenizer(vocab), model.config.encoder.max_len,
                                 self.cleaning)
        probabilities = model.predict_proba(sequences)
        targets = np.asarray([e.labels for e in examples], dtype=np.int64)
        return evaluate_predictions(targets, probabilities, model.config.threshold, averaging)

    def _resampled_train(self, split_train: Sequence[LabeledExample], streams: RngStreams,
                         mode: Optional[str] = None) -> List[LabeledExample]:
        mode = mode or self.config.sampling_mode
        train = resample(split_train, mode, streams.stream("sampling"))
        if mode != "none":
            _ok(f"{mode}sampled training split: {len(split_train)} -> {len(train)} examples")
        return train

    # ---------------------------------------------------------------- commands

    def train(self) -> Dict[str, Any]:
        """
        Train one model and save the best-validation checkpoint and the curve.

        Returns:
            Summary dictionary with paths and final metrics
        """
        console.print(f"\n[bold][ExperimentRunner][/bold] Training with seed {self.config.seed}")
        console.print("=" * 80)
        streams = RngStreams(self.config.seed)

        _phase(1, 4, "Loading dataset...")
        split = self.load_splits(streams)
        _ok(f"train {len(split.train)}, validation {len(split.validation)}, test {len(split.test)}")

        _phase(2, 4, f"Preparing training split (sampling: {self.config.sampling_mode})...")
        train = self._resampled_train(split.train, streams)
        counts = class_counts(train)
        _ok("label counts: " + ", ".join(f"{k}={v}" for k, v in counts.as_dict().items()))

        _phase(3, 4, "Training hybrid encoder + LSTM model...")
        trained = self.fit(train, split.validation, streams, output_dir=self.output_dir, vocab_source=split.train)
        best = trained.result.best_record()
        _ok(f"{trained.model.parameter_count():,} parameters, {trained.result.steps} updates")
        if best is not None:
            _ok(f"best epoch {best.epoch}: train loss {best.train_loss:.4f}, val loss {fmt(best.val_loss)}")

        _phase(4, 4, "Writing checkpoint and curves...")
        checkpoint = save_checkpoint(trained.model, self.output_dir / CHECKPOINT_NAME, trained.vocab)
        curve = self.reporter.write_curve(trained.result.curve)
        for name, examples in (("validation", split.validation), ("test", split.test)):
            if examples and not self.config.get("data", f"{name}_path"):
                write_dataset(examples, self.output_dir / f"{name}.csv")
        self.reporter.write_json({"seed": self.config.seed, "settings": self.config.settings}, "run_config.json")
        _ok(f"checkpoint saved to: {checkpoint}")
        _ok(f"curve saved to: {curve}")

        summary: Dict[str, Any] = {"checkpoint": checkpoint, "curve": curve, "result": trained.result}
        if split.validation:
            report = self.score(trained.model, trained.vocab, split.validation)
            self.reporter.write_metrics(report, stem="validation_metrics", title="validation")
            summary["validation"] = report
            _ok(f"validation accuracy {report.accuracy:.4f}, F1 {report.f1:.4f}")

        console.print("\n" + "=" * 80)
        console.print("[ExperimentRunner] Training complete!", markup=False)
        console.print("=" * 80 + "\n")
        return summary

    def evaluate(self, checkpoint_path: Path, split_path: Path, averaging: str = "macro") -> MetricsReport:
        """
        Full metrics report of a checkpoint on a held-out split file.

        Raises:
            FileNotFoundError: If either file is missing
            ConfigError: If the split file is resampled training data
        """
        split_path = Path(split_path)
        if not split_path.exists():
            raise FileNotFoundError(f"split file not found: {split_path}")
        provenance = read_provenance(split_path)
        if provenance != "original":
            raise ConfigError(f"refusing to evaluate on {provenance} data ({split_path}); pass a held-out split")

        _phase(1, 2, "Loading checkpoint and split...")
        model, vocab = load_checkpoint_with_vocab(Path(checkpoint_path))
        examples = load_dataset(split_path)
        _ok(f"{model.parameter_count():,} parameters, {len(examples)} examples")

        _phase(2, 2, "Scoring...")
        report = self.score(model, vocab, examples, averaging)
        paths = self.reporter.write_metrics(report, stem="metrics", title=split_path.stem)
        _ok(f"report saved to: {paths['text']}")
        self.print_summary({split_path.stem: report})
        return report

    def _run_fold(self, index: int, train: List[LabeledExample], held: List[LabeledExample],
                  streams: RngStreams, show_progress: bool) -> MetricsReport:
        fold_streams = streams.child(index)
        inner = split_dataset(train, (0.9, 0.1, 0.0), fold_streams.stream("split"))
        fold_train = resample(inner.train, self.config.sampling_mode, fold_streams.stream("sampling"))
        trained = self.fit(fold_train, inner.validation, fold_streams,
                           output_dir=self.output_dir / f"fold_{index + 1}",
                           vocab_source=inner.train, show_progress=show_progress)
        report = self.score(trained.model, trained.vocab, held)
        logger.info(f"fold {index + 1}: accuracy {report.accuracy:.4f}")
        return report

    def crossval(self, k: Optional[int] = None) -> Tuple[List[MetricsReport], MetricsReport]:
        """
        k-fold cross-validation; each fold trains on the other folds and is
        scored on itself. Folds run in `crossval.workers` threads.
        """
        k = int(k or self.config.get("crossval", "k", 5))
        workers = int(self.config.get("crossval", "workers", 1))
        streams = RngStreams(self.config.seed)

        _phase(1, 3, "Partitioning dataset...")
        examples = self.all_examples()
        fold_seed = int(streams.stream("crossval").integers(0, 2 ** 31 - 1))
        folds = kfold_partition(examples, k, fold_seed)
        _ok(f"{len(examples)} examples in {k} folds of sizes {[len(held) for _, held in folds]}")

        _phase(2, 3, f"Training {k} models ({workers} worker{'s' if workers > 1 else ''})...")
        show = self.show_progress and workers == 1
        per_fold = Parallel(n_jobs=workers, backend="threading")(
            delayed(self._run_fold)(i, train, held, streams, show) for i, (train, held) in enumerate(folds)
        )
        for i, report in enumerate(per_fold, 1):
            _ok(f"fold {i}: accuracy {report.accuracy:.4f}, F1 {report.f1:.4f}")

        _phase(3, 3, "Aggregating folds...")
        aggregate = crossval_aggregate(per_fold)
        paths = self.reporter.write_crossval(per_fold, aggregate)
        _ok(f"accuracy {aggregate.accuracy:.4f} ± {aggregate.std['accuracy']:.4f}")
        _ok(f"table saved to: {paths['table']}")
        reports = {f"Fold {i}": r for i, r in enumerate(per_fold, 1)}
        reports["Average"] = aggregate
        self.print_summary(reports)
        return per_fold, aggregate

    def resample(self) -> Dict[str, Any]:
        """
        Write the resampled training split and a before/after counts table.

        Raises:
            ConfigError: If the sampling mode is `none`
        """
        mode = self.config.sampling_mode
        if mode == "none":
            raise ConfigError("resample needs --sampling under or --sampling over")
        streams = RngStreams(self.config.seed)

        _phase(1, 3, "Loading dataset...")
        split = self.load_splits(streams)
        _ok(f"train {len(split.train)}, validation {len(split.validation)}, test {len(split.test)}")

        _phase(2, 3, "Resampling training split...")
        variants = {}
        for name in ("under", "over"):
            variants[name] = resample(split.train, name, streams.fresh("sampling"))
        rows = resampling_table(split.train, variants["under"], variants["over"])
        _ok(f"{mode}sampled: {len(split.train)} -> {len(variants[mode])} examples")

        _phase(3, 3, "Writing files...")
        train_path = write_dataset(variants[mode], self.output_dir / f"train_{provenance_for(mode)}.csv", provenance_for(mode))
        for name, examples in (("validation", split.validation), ("test", split.test)):
            write_dataset(examples, self.output_dir / f"{name}.csv")
        paths = self.reporter.write_resample_counts(rows)
        _ok(f"training split saved to: {train_path}")
        _ok(f"counts saved to: {paths['table']}")

        table = Table(title="Training label counts")
        for column in rows[0]:
            table.add_column(str(column))
        for row in rows:
            table.add_row(*[str(v) for v in row.values()])
        console.print(table)
        return {"train": train_path, "rows": rows, "counts": paths["table"]}

    def explain(self, checkpoint_path: Path, text: str, labels: Sequence[str],
                n_samples: Optional[int] = None) -> List[Explanation]:
        """Per-label word importances for one comment."""
        section = self.config.section("explain")
        _phase(1, 2, "Loading checkpoint...")
        model, vocab = load_checkpoint_with_vocab(Path(checkpoint_path))
        _ok(f"{model.parameter_count():,} parameters, vocabulary {len(vocab)}")

        _phase(2, 2, "Fitting local surrogates...")
        explanations = explain_comment(
            text,
            model,
            vocab,
            list(labels),
            n=int(n_samples or section.get("n_samples", 200)),
            seed=self.config.seed,
            cleaning=self.cleaning,
            kernel_width=section.get("kernel_width"),
            ridge=float(section.get("ridge", 1e-6)),
            exhaustive_limit=int(section.get("exhaustive_limit", 256)),
        )
        paths = self.reporter.write_explanations(text, explanations)
        for exp in explanations:
            top = ", ".join(f"{t} ({w:+.3f})" for t, w in exp.weighted_tokens[:3])
            _ok(f"{exp.label} p={exp.base_probability:.3f}: {top}")
        _ok(f"explanation saved to: {paths['text']}")
        return explanations

    def sweep(self, setting: str, values: Sequence[Any]) -> List[Dict[str, Any]]:
        """
        Train one model per value of `setting` on the same split and compare.

        Rows carry Train/Val/Test labelwise accuracy and the summary columns
        measured on the test split (validation when there is no test split).
        """
        if setting not in SWEEP_SETTINGS:
            raise ConfigError(f"sweep setting must be one of {', '.join(SWEEP_SETTINGS)}, got {setting!r}")
        if not values:
            raise ConfigError("sweep needs at least one value")
        section, key = SWEEP_SETTINGS[setting]
        streams = RngStreams(self.config.seed)

        _phase(1, 3, "Loading dataset...")
        split = self.load_splits(streams)
        held = split.test or split.validation
        if not held:
            raise ConfigError("sweep needs a validation or test split")
        _ok(f"train {len(split.train)}, validation {len(split.validation)}, test {len(split.test)}")

        _phase(2, 3, f"Training {len(values)} models over {setting}...")
        rows = []
        for value in values:
            settings = copy.deepcopy(self.config.settings)
            settings.setdefault(section, {})[key] = value
            run_streams = RngStreams(self.config.seed)
            mode = settings.get("sampling", {}).get("mode", "none")
            train = resample(split.train, mode, run_streams.stream("sampling"))
            trained = self.fit(train, split.validation, run_streams, settings=settings, vocab_source=split.train)

            def _acc(examples: Sequence[LabeledExample]) -> float:
                if not examples:
                    return float("nan")
                return self.score(trained.model, trained.vocab, examples).accuracy

            report = self.score(trained.model, trained.vocab, held)
            row = {setting: value, "Train Acc": _acc(train), "Val Acc": _acc(split.validation),
                   "Test Acc": _acc(split.test)}
            row.update(summary_row(report))
            rows.append(row)
            _ok(f"{setting}={value}: test accuracy {fmt(row['Test Acc'])}")

        _phase(3, 3, "Writing comparison table...")
        paths = self.reporter.write_sweep(rows, name=f"sweep_{setting}")
        _ok(f"table saved to: {paths['table']}")
        return rows

    def print_summary(self, reports: Dict[str, MetricsReport]) -> None:
        """Rich console table of the summary columns."""
        table = Table(title="Evaluation summary")
        table.add_column("Run", style="cyan")
        for title, _ in SUMMARY_COLUMNS:
            table.add_column(title, justify="right")
        for row in summary_table_rows(reports):
            table.add_row(*row)
        console.print(table)
