"""
Training loop.

Per minibatch: forward (training mode) -> BCE -> backward -> clip global norm
-> AdamW step at the scheduled learning rate -> zero grads. After each epoch
the model is scored in eval mode on the training and validation splits, and
the parameters with the lowest validation loss are kept as the best snapshot.
"""

import json
import logging
import math
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Dict, List, Mapping, Optional, Sequence, Tuple

import numpy as np
from rich.console import Console
from rich.progress import BarColumn, Progress, SpinnerColumn, TextColumn, TimeRemainingColumn

from src.autograd import backward, no_grad
from src.data.dataset import LabeledExample
from src.evaluation.metrics import multilabel_accuracy
from src.exceptions import ConfigError, NonFiniteLossError
from src.models.hybrid import HybridModel, bce_loss, predict
from src.optim.adamw import AdamW, clip_global_norm, global_norm
from src.optim.schedule import Schedule, schedule_lr
from src.rng import RngStreams
from src.text.cleaning import CleaningConfig
from src.text.tokenizer import Tokenizer, encode_batch

console = Console()
logger = logging.getLogger(__name__)

DIAGNOSTICS_FILENAME = "diagnostics.json"


def _setting(section: Dict, key: str, default):
    """Section value, falling back to `default` only when the key is unset or null."""
    value = section.get(key)
    return default if value is None else value


@dataclass
class EncodedSplit:
    """Model-ready arrays for one split."""

    ids: np.ndarray
    mask: np.ndarray
    targets: np.ndarray

    def __len__(self) -> int:
        return int(self.ids.shape[0])

    def take(self, index: np.ndarray) -> "EncodedSplit":
        return EncodedSplit(self.ids[index], self.mask[index], self.targets[index])


def encode_examples(
    examples: Sequence[LabeledExample],
    tokenizer: Tokenizer,
    max_len: int,
    cleaning: Optional[CleaningConfig] = None,
    n_labels: int = 5,
) -> EncodedSplit:
    """Clean, tokenize and stack a list of examples."""
    if not examples:
        return EncodedSplit(
            np.zeros((0, max_len), dtype=np.int64),
            np.zeros((0, max_len), dtype=np.int8),
            np.zeros((0, n_labels), dtype=np.int64),
        )
    sequences = encode_batch([e.text for e in examples], tokenizer, max_len, cleaning)
    return EncodedSplit(
        ids=np.stack([s.ids for s in sequences]),
        mask=np.stack([s.mask for s in sequences]),
        targets=np.asarray([e.labels for e in examples], dtype=np.int64),
    )


@dataclass
class EpochRecord:
    epoch: int
    train_loss: float
    val_loss: float
    val_accuracy: float
    train_accuracy: float
    learning_rate: float


@dataclass
class TrainingResult:
    """Outcome of `Trainer.fit`; `model` holds the best snapshot when one was restored."""

    model: HybridModel
    curve: List[EpochRecord] = field(default_factory=list)
    best_epoch: int = 0
    best_val_loss: float = float("inf")
    steps: int = 0

    @property
    def final(self) -> Optional[EpochRecord]:
        return self.curve[-1] if self.curve else None

    def best_record(self) -> Optional[EpochRecord]:
        for record in self.curve:
            if record.epoch == self.best_epoch:
                return record
        return None


class Trainer:
    """
    Trains a HybridModel with AdamW, clipping and warmup/decay scheduling.

    Settings come from the `training` and `optimizer` config sections.
    """

    def __init__(
        self,
        model: HybridModel,
        streams: RngStreams,
        training: Optional[Mapping] = None,
        optimizer: Optional[Mapping] = None,
        output_dir: Optional[Path] = None,
        show_progress: bool = True,
    ):
        """
        Args:
            model: Model to train in place
            streams: Seeded generators (`batches` and `dropout` are used)
            training: `training` section (epochs, batch_size, eval_batch_size)
            optimizer: `optimizer` section (lr, betas, eps, weight_decay, warmup_ratio, clip_norm)
            output_dir: Where diagnostics.json goes on a non-finite loss
            show_progress: Render a rich progress bar
        """
        self.model = model
        self.streams = streams
        self.training = dict(training or {})
        self.optimizer_settings = dict(optimizer or {})
        self.output_dir = Path(output_dir) if output_dir else None
        self.show_progress = show_progress

        self.batch_size = int(_setting(self.training, "batch_size", 32))
        if self.batch_size < 1:
            raise ConfigError(f"batch_size must be >= 1, got {self.batch_size}")
        self.eval_batch_size = int(_setting(self.training, "eval_batch_size", 64))
        if self.eval_batch_size < 1:
            raise ConfigError(f"eval_batch_size must be >= 1, got {self.eval_batch_size}")
        self.clip_norm = float(_setting(self.optimizer_settings, "clip_norm", 1.0))
        if self.clip_norm <= 0:
            raise ConfigError(f"clip_norm must be positive, got {self.clip_norm}")
        self.base_lr = float(_setting(self.optimizer_settings, "lr", 1e-5))
        if self.base_lr < 0:
            raise ConfigError(f"learning rate must be >= 0, got {self.base_lr}")
        self.warmup_ratio = float(_setting(self.optimizer_settings, "warmup_ratio", 0.1))
        self.optimizer = AdamW.from_section(model.trainable_parameters(), self.optimizer_settings)

    def _check_finite(self, loss_value: float, epoch: int, step: int) -> None:
        if math.isfinite(loss_value):
            return
        diagnostics = {
            "epoch": epoch,
            "step": step,
            "loss": repr(loss_value),
            "parameter_norms": {
                name: float(np.linalg.norm(t.data)) for name, t in self.model.registry.items()
            },
            "gradient_norm": global_norm(self.optimizer.grads()),
        }
        if self.output_dir is not None:
            self.output_dir.mkdir(parents=True, exist_ok=True)
            path = self.output_dir / DIAGNOSTICS_FILENAME
            with open(path, "w", encoding="utf-8") as f:
                json.dump(diagnostics, f, indent=2, sort_keys=True)
            logger.error(f"non-finite loss; diagnostics written to {path}")
        raise NonFiniteLossError(f"loss became {loss_value} at epoch {epoch}, step {step}", diagnostics)

    def evaluate(self, split: EncodedSplit) -> Tuple[float, np.ndarray]:
        """
        Eval-mode loss and probabilities over a split, `eval_batch_size` rows at a time.

        Returns:
            (mean per-example BCE, probabilities [N, K]); NaN loss for an empty split
        """
        n = len(split)
        if n == 0:
            return float("nan"), np.zeros((0, self.model.config.n_labels))
        total = 0.0
        chunks = []
        with no_grad():
            for start in range(0, n, self.eval_batch_size):
                part = split.take(np.arange(start, min(start + self.eval_batch_size, n)))
                logits = self.model.forward((part.ids, part.mask), training=False)
                total += bce_loss(logits, part.targets).item() * len(part)
                chunks.append(predict(logits).probabilities)
        return total / n, np.concatenate(chunks, axis=0)

    def _accuracy(self, split: EncodedSplit, probabilities: np.ndarray) -> float:
        if len(split) == 0:
            return float("nan")
        predicted = (probabilities >= self.model.config.threshold).astype(np.int64)
        return multilabel_accuracy(split.targets, predicted, "labelwise")

    def fit(
        self,
        train: EncodedSplit,
        validation: Optional[EncodedSplit] = None,
        epochs: Optional[int] = None,
        restore_best: bool = True,
    ) -> TrainingResult:
        """
        Run the training loop.

        Args:
            train: Encoded training split
            validation: Encoded validation split (best snapshot falls back to train loss when absent)
            epochs: Number of epochs; defaults to the `training.epochs` setting
            restore_best: Load the best snapshot into the model before returning

        Raises:
            ConfigError: If no epoch count is given anywhere
            NonFiniteLossError: If a minibatch loss is NaN or infinite
        """
        epochs = epochs if epochs is not None else self.training.get("epochs")
        if epochs is None:
            raise ConfigError("the number of epochs must be given explicitly")
        epochs = int(epochs)
        if epochs < 0:
            raise ConfigError(f"epochs must be >= 0, got {epochs}")
        if len(train) == 0 and epochs > 0:
            raise ConfigError("cannot train on an empty training split")

        batches_per_epoch = math.ceil(len(train) / self.batch_size) if len(train) else 0
        schedule = Schedule(total_steps=epochs * batches_per_epoch, warmup_ratio=self.warmup_ratio)
        batch_rng = self.streams.stream("batches")
        dropout_rng = self.streams.stream("dropout")
        result = TrainingResult(model=self.model)
        best_snapshot = self.model.state_arrays()
        step = 0
        lr = 0.0

        progress = Progress(
            SpinnerColumn(),
            TextColumn("[progress.description]{task.description}"),
            BarColumn(),
            TextColumn("{task.completed}/{task.total}"),
            TimeRemainingColumn(),
            console=console,
            transient=True,
            disable=not self.show_progress,
        )
        with progress:
            task = progress.add_task("Training", total=schedule.total_steps)
            for epoch in range(1, epochs + 1):
                order = batch_rng.permutation(len(train))
                running = 0.0
                for start in range(0, len(train), self.batch_size):
                    batch = train.take(order[start:start + self.batch_size])
                    self.optimizer.zero_grad()
                    logits = self.model.forward((batch.ids, batch.mask), training=True, rng=dropout_rng)
                    loss = bce_loss(logits, batch.targets)
                    self._check_finite(loss.item(), epoch, step + 1)
                    backward(loss)
                    clip_global_norm(self.optimizer.grads(), self.clip_norm)
                    step += 1
                    # update t uses the multiplier at t, so the final update lands on 0
                    lr = schedule_lr(step, schedule, self.base_lr)
                    self.optimizer.step(lr)
                    running += loss.item() * len(batch)
                    progress.update(task, advance=1, description=f"Epoch {epoch}/{epochs} loss {loss.item():.4f}")
                self.optimizer.zero_grad()

                train_loss = running / len(train)
                _, train_probs = self.evaluate(train)
                val_loss, val_probs = self.evaluate(validation) if validation is not None else (float("nan"), None)
                record = EpochRecord(
                    epoch=epoch,
                    train_loss=train_loss,
                    val_loss=val_loss,
                    val_accuracy=self._accuracy(validation, val_probs) if validation is not None else float("nan"),
                    train_accuracy=self._accuracy(train, train_probs),
                    learning_rate=lr,
                )
                result.curve.append(record)
                logger.debug(f"epoch {epoch}: {asdict(record)}")

                criterion = val_loss if math.isfinite(val_loss) else train_loss
                if criterion < result.best_val_loss:
                    result.best_val_loss = criterion
                    result.best_epoch = epoch
                    best_snapshot = self.model.state_arrays()

        result.steps = step
        if restore_best and result.curve:
            self.model.load_state_arrays(best_snapshot)
        return result


def curve_rows(curve: Sequence[EpochRecord]) -> List[Dict[str, float]]:
    return [asdict(r) for r in curve]
