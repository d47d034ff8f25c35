"""
Command-line entry point.

    cyberguard train --dataset comments.csv --epochs 30 --seed 7
    cyberguard evaluate --checkpoint runs/latest/model.ckpt --split runs/latest/test.csv --seed 7
    cyberguard crossval --dataset comments.csv --epochs 30 --k 5 --seed 7
    cyberguard resample --dataset comments.csv --sampling over --seed 7
    cyberguard explain --checkpoint runs/latest/model.ckpt --text "..." --label bully --seed 7
    cyberguard sweep --dataset comments.csv --epochs 30 --over lr --values 1e-5,1e-4 --seed 7
    cyberguard demo-data --n 200 --output data/synthetic.csv --seed 7

Exit codes: 0 success, 1 runtime failure, 2 usage or configuration error.
"""

import functools
import logging
import os
import sys
from pathlib import Path
from typing import Any, Callable, Dict, Optional

import click
from dotenv import load_dotenv
from rich.console import Console
from rich.logging import RichHandler
from rich.markup import escape

from src import LABELS, __version__
from src.config import SAMPLING_MODES, build_run_config
from src.data.dataset import write_dataset
from src.data.synthetic import generate_planted_corpus
from src.exceptions import ConfigError, CyberguardError
from src.experiment_runner import ExperimentRunner
from src.models.encoder import PRESETS
from src.rng import RngStreams

console = Console()
logger = logging.getLogger(__name__)

EXIT_RUNTIME = 1
EXIT_USAGE = 2

EXISTING_FILE = click.Path(exists=True, dir_okay=False, path_type=Path)


def setup_logging(level: Optional[str] = None) -> None:
    """Route all package logging through a RichHandler on the root logger."""
    level = (level or os.getenv("CYBERGUARD_LOG_LEVEL") or "WARNING").upper()
    logging.basicConfig(
        level=level,
        format="%(message)s",
        handlers=[RichHandler(console=Console(stderr=True), show_time=False, show_path=False)],
        force=True,
    )


def _fail(message: str, code: int) -> None:
    console.print(f"  [red]✗[/red] {escape(message)}")
    sys.exit(code)


def run_guarded(action: Callable[[], Any]) -> Any:
    """Run a command body, mapping package errors onto exit codes."""
    try:
        return action()
    except (ConfigError, FileNotFoundError) as e:
        _fail(str(e), EXIT_USAGE)
    except CyberguardError as e:
        _fail(f"{type(e).__name__}: {e}", EXIT_RUNTIME)


def _stack(*decorators):
    def apply(func):
        return functools.reduce(lambda f, d: d(f), reversed(decorators), func)
    return apply


common_options = _stack(
    click.option("--seed", type=int, default=None, help="Seed for every random stream (required)"),
    click.option("--config", "config_path", type=EXISTING_FILE, default=None, help="Flat key-value run-config file"),
    click.option("--output-dir", type=click.Path(file_okay=False, path_type=Path), default=None,
                 help="Directory for result files"),
)

data_options = _stack(
    click.option("--dataset", type=EXISTING_FILE, default=None, help="Labelled CSV to split"),
    click.option("--train-file", type=EXISTING_FILE, default=None, help="Explicit training split"),
    click.option("--validation-file", type=EXISTING_FILE, default=None, help="Explicit validation split"),
    click.option("--test-file", type=EXISTING_FILE, default=None, help="Explicit test split"),
    click.option("--sampling", type=click.Choice(SAMPLING_MODES), default=None, help="Training-split resampling"),
)

model_options = _stack(
    click.option("--preset", type=click.Choice(sorted(PRESETS)), default=None, help="Model size preset"),
    click.option("--max-len", type=int, default=None, help="Sequence length"),
    click.option("--freeze-bottom-k", type=int, default=None, help="Freeze embeddings and the lowest k encoder layers"),
    click.option("--readout", type=click.Choice(["last_step", "last_unmasked"]), default=None, help="LSTM readout"),
    click.option("--dtype", type=click.Choice(["float64", "float32"]), default=None, help="Parameter precision"),
    click.option("--epochs", type=int, default=None, help="Number of epochs (required)"),
    click.option("--batch-size", type=int, default=None, help="Minibatch size"),
    click.option("--lr", type=float, default=None, help="Peak learning rate"),
    click.option("--weight-decay", type=float, default=None, help="Decoupled weight decay"),
    click.option("--warmup-ratio", type=float, default=None, help="Fraction of updates spent warming up"),
    click.option("--clip-norm", type=float, default=None, help="Global gradient norm bound"),
)


def make_runner(seed, config_path, overrides: Dict[str, Any], show_progress: bool = True) -> ExperimentRunner:
    run_config = build_run_config(seed, config_path, overrides)
    return ExperimentRunner(run_config, show_progress=show_progress)


def _require_epochs(runner: ExperimentRunner) -> None:
    if runner.config.get("training", "epochs") is None:
        raise ConfigError("the number of epochs is required: pass --epochs or set `epochs` in --config")


def _overrides(**kwargs) -> Dict[str, Any]:
    """Flat run-config keys from click parameters (names match FLAT_KEYS); unset flags are dropped."""
    flat = {}
    for key, value in kwargs.items():
        if value is None:
            continue
        flat[key] = str(value) if isinstance(value, Path) else value
    return flat


@click.group()
@click.version_option(__version__, prog_name="cyberguard")
@click.option("--log-level", default=None, help="Logging level (default from CYBERGUARD_LOG_LEVEL or WARNING)")
def cli(log_level):
    """Multilabel cyberbullying comment classifier."""
    load_dotenv()
    setup_logging(log_level)


@cli.command()
@common_options
@data_options
@model_options
def train(seed, config_path, output_dir, **options):
    """Train a model and save its best-validation checkpoint and curves."""
    def action():
        runner = make_runner(seed, config_path, _overrides(output_dir=output_dir, **options))
        _require_epochs(runner)
        runner.train()
    run_guarded(action)


@cli.command()
@common_options
@click.option("--checkpoint", type=EXISTING_FILE, required=True, help="Checkpoint written by `train`")
@click.option("--split", "split_path", type=EXISTING_FILE, required=True, help="Held-out split CSV")
@click.option("--averaging", type=click.Choice(["macro", "micro"]), default="macro", help="Headline P/R/F1 averaging")
def evaluate(seed, config_path, output_dir, checkpoint, split_path, averaging):
    """Write the full metrics report and ROC files for a held-out split."""
    def action():
        runner = make_runner(seed, config_path, _overrides(output_dir=output_dir))
        runner.evaluate(checkpoint, split_path, averaging)
    run_guarded(action)


@cli.command()
@common_options
@data_options
@model_options
@click.option("--k", type=int, default=None, help="Number of folds")
@click.option("--workers", type=int, default=None, help="Parallel fold workers")
def crossval(seed, config_path, output_dir, k, workers, **options):
    """k-fold cross-validation with per-fold and averaged reports."""
    def action():
        runner = make_runner(seed, config_path,
                             _overrides(output_dir=output_dir, k=k, workers=workers, **options))
        _require_epochs(runner)
        runner.crossval()
    run_guarded(action)


@cli.command()
@common_options
@data_options
def resample(seed, config_path, output_dir, **options):
    """Write the resampled training split and a before/after counts table."""
    def action():
        runner = make_runner(seed, config_path, _overrides(output_dir=output_dir, **options))
        runner.resample()
    run_guarded(action)


@cli.command()
@common_options
@click.option("--checkpoint", type=EXISTING_FILE, required=True, help="Checkpoint written by `train`")
@click.option("--text", required=True, help="Comment to explain")
@click.option("--label", "labels", multiple=True, type=click.Choice(LABELS), help="Label(s) to explain (default: all)")
@click.option("--n-samples", type=int, default=None, help="Number of perturbations")
def explain(seed, config_path, output_dir, checkpoint, text, labels, n_samples):
    """Per-label word importances for one comment."""
    def action():
        runner = make_runner(seed, config_path, _overrides(output_dir=output_dir, n_samples=n_samples))
        runner.explain(checkpoint, text, labels or LABELS, n_samples)
    run_guarded(action)


@cli.command()
@common_options
@data_options
@model_options
@click.option("--over", "setting", type=click.Choice(["sampling", "lr"]), required=True, help="Setting to vary")
@click.option("--values", required=True, help="Comma-separated values, e.g. none,under,over or 1e-5,1e-4")
def sweep(seed, config_path, output_dir, setting, values, **options):
    """Train one model per value of a setting and write a comparison table."""
    def action():
        parsed = [v.strip() for v in values.split(",") if v.strip()]
        if setting == "lr":
            try:
                parsed = [float(v) for v in parsed]
            except ValueError as e:
                raise ConfigError(f"learning rates must be numbers: {e}") from e
        elif any(v not in SAMPLING_MODES for v in parsed):
            raise ConfigError(f"sampling values must be among {', '.join(SAMPLING_MODES)}")
        runner = make_runner(seed, config_path, _overrides(output_dir=output_dir, **options))
        _require_epochs(runner)
        runner.sweep(setting, parsed)
    run_guarded(action)


@cli.command("demo-data")
@click.option("--seed", type=int, required=True, help="Generator seed")
@click.option("--n", "n_examples", type=int, default=200, help="Number of comments")
@click.option("--output", type=click.Path(dir_okay=False, path_type=Path), required=True, help="Dataset CSV to write")
def demo_data(seed, n_examples, output):
    """Write a synthetic planted-word corpus as a dataset CSV."""
    def action():
        if n_examples < 1:
            raise ConfigError("--n must be at least 1")
        examples = generate_planted_corpus(n_examples, RngStreams(seed).stream("split"))
        path = write_dataset(examples, output)
        console.print(f"  [green]✓[/green] {len(examples)} comments written to {escape(str(path))}")
    run_guarded(action)


def main():
    cli()


if __name__ == "__main__":
    main()
