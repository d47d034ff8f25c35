"""
Multilabel resampling of the training split and k-fold partitioning.

Both resamplers work on whole examples: removing or duplicating a comment
removes or duplicates all of its labels, so exact per-label balance is usually
out of reach when labels co-occur. Undersampling stops at the floor where no
further removal is legal; oversampling accepts overshoot on co-occurring labels.
"""

import logging
from dataclasses import dataclass
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np
from sklearn.model_selection import KFold

from src import LABELS
from src.config import SAMPLING_MODES
from src.data.dataset import LabeledExample
from src.exceptions import ConfigError, ResamplingError

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class ClassCounts:
    """Per-label positive counts n_c in label order."""

    counts: Tuple[int, ...]

    def __getitem__(self, label: str) -> int:
        return self.counts[LABELS.index(label)]

    def as_dict(self) -> Dict[str, int]:
        return dict(zip(LABELS, self.counts))

    @property
    def minimum(self) -> int:
        return min(self.counts)

    @property
    def maximum(self) -> int:
        return max(self.counts)

    def zero_labels(self) -> List[str]:
        return [name for name, n in zip(LABELS, self.counts) if n == 0]


def class_counts(examples: Sequence[LabeledExample]) -> ClassCounts:
    totals = np.zeros(len(LABELS), dtype=np.int64)
    for e in examples:
        totals += np.asarray(e.labels, dtype=np.int64)
    return ClassCounts(tuple(int(n) for n in totals))


def _require_all_labels(counts: ClassCounts, action: str) -> None:
    missing = counts.zero_labels()
    if missing:
        raise ResamplingError(f"cannot {action}: no positive examples for {', '.join(missing)}")


def undersample(train: Sequence[LabeledExample], rng: np.random.Generator) -> List[LabeledExample]:
    """
    Reduce every label towards min(n_c).

    Examples are visited in a seeded random order; one is removed when every
    label it carries is still above the target. Counts only decrease, so an
    example that could not be removed once never becomes removable and one pass
    reaches the feasibility floor. Examples with no positive label are kept.

    Args:
        train: Training examples
        rng: Generator for the visiting order (the `sampling` stream)

    Returns:
        Retained examples in their original order

    Raises:
        ResamplingError: If some label has no positive example
    """
    counts = class_counts(train)
    _require_all_labels(counts, "undersample")
    target = counts.minimum
    current = np.asarray(counts.counts, dtype=np.int64)

    removed = np.zeros(len(train), dtype=bool)
    for idx in rng.permutation(len(train)):
        positives = train[idx].positive_labels
        if not positives:
            continue
        if all(current[c] > target for c in positives):
            removed[idx] = True
            for c in positives:
                current[c] -= 1

    stuck = [f"{LABELS[c]}={int(current[c])}" for c in range(len(LABELS)) if current[c] > target]
    if stuck:
        logger.info(f"undersampling reached its feasibility floor above target {target}: {', '.join(stuck)}")
    result = [e for e, gone in zip(train, removed) if not gone]
    logger.debug(f"undersampled {len(train)} -> {len(result)} examples")
    return result


def oversample(train: Sequence[LabeledExample], rng: np.random.Generator) -> List[LabeledExample]:
    """
    Raise every label to at least max(n_c) by duplicating whole examples.

    Labels are processed from least to most frequent (original counts); for
    each, random examples from the original pool carrying that label are
    appended until its running count reaches the target. Duplicates keep their
    full label tuple, so co-occurring labels can overshoot.

    Raises:
        ResamplingError: If some label has no positive example
    """
    counts = class_counts(train)
    _require_all_labels(counts, "oversample")
    target = counts.maximum
    current = np.asarray(counts.counts, dtype=np.int64)
    result = list(train)

    order = sorted(range(len(LABELS)), key=lambda c: (counts.counts[c], c))
    for c in order:
        pool = [e for e in train if e.labels[c]]
        deficit = target - int(current[c])
        while deficit > 0:
            picks = rng.choice(len(pool), size=deficit, replace=True)
            for i in picks:
                if current[c] >= target:
                    break
                chosen = pool[int(i)]
                result.append(chosen)
                current += np.asarray(chosen.labels, dtype=np.int64)
            deficit = target - int(current[c])

    logger.debug(f"oversampled {len(train)} -> {len(result)} examples; counts {current.tolist()}")
    return result


def resample(train: Sequence[LabeledExample], mode: str, rng: Optional[np.random.Generator]) -> List[LabeledExample]:
    """Dispatch on the sampling mode: `none`, `under` or `over`."""
    if mode not in SAMPLING_MODES:
        raise ConfigError(f"sampling mode must be one of {', '.join(SAMPLING_MODES)}, got {mode!r}")
    if mode == "none":
        return list(train)
    if rng is None:
        raise ConfigError("resampling needs a random generator")
    return undersample(train, rng) if mode == "under" else oversample(train, rng)


def provenance_for(mode: str) -> str:
    return {"none": "original", "under": "undersampled", "over": "oversampled"}[mode]


def kfold_partition(
    examples: Sequence[LabeledExample], k: int, seed: int
) -> List[Tuple[List[LabeledExample], List[LabeledExample]]]:
    """
    Seeded shuffle then k near-equal disjoint folds.

    Returns:
        k (train, held_out) pairs; held-out sizes differ by at most one and
        their union is the input

    Raises:
        ConfigError: If k < 2
        ResamplingError: If there are fewer examples than folds
    """
    if k < 2:
        raise ConfigError(f"k must be at least 2, got {k}")
    if len(examples) < k:
        raise ResamplingError(f"cannot split {len(examples)} examples into {k} folds")
    splitter = KFold(n_splits=k, shuffle=True, random_state=seed)
    folds = []
    for train_idx, held_idx in splitter.split(np.arange(len(examples))):
        folds.append(([examples[i] for i in train_idx], [examples[i] for i in held_idx]))
    return folds


def resampling_table(
    original: Sequence[LabeledExample],
    undersampled: Optional[Sequence[LabeledExample]] = None,
    oversampled: Optional[Sequence[LabeledExample]] = None,
) -> List[Dict[str, int]]:
    """Rows of per-label counts (plus example totals) for the train imbalance table."""
    rows = []
    for name, examples in (("Imbalance", original), ("Undersampled", undersampled), ("Oversampled", oversampled)):
        if examples is None:
            continue
        row = {"split": name}
        row.update(class_counts(examples).as_dict())
        row["examples"] = len(examples)
        rows.append(row)
    return rows
