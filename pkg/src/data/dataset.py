"""
Dataset ingestion and splitting.

Dataset files are UTF-8 CSV with the header
    text,bully,sexual,religious,threat,spam
Resampled training files written by `write_dataset` start with an extra
`#provenance=<tag>` line so evaluation can refuse them.
"""

import logging
import re
from dataclasses import dataclass, field
from pathlib import Path
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np
import pandas as pd

from src import LABELS
from src.exceptions import ConfigError, DatasetFormatError

logger = logging.getLogger(__name__)

HEADER = ("text",) + LABELS
PROVENANCE_PREFIX = "#provenance="
PROVENANCES = ("original", "undersampled", "oversampled")

_PANDAS_LINE = re.compile(r"line (\d+)")


@dataclass(frozen=True)
class LabeledExample:
    """
    One comment with its 5-slot binary label vector.

    Label order is fixed: (bully, sexual, religious, threat, spam).
    `example_id` identifies the source row; resampled duplicates share it.
    """

    text: str
    labels: Tuple[int, ...]
    example_id: str = ""

    def __post_init__(self):
        labels = tuple(int(v) for v in self.labels)
        if len(labels) != len(LABELS):
            raise ValueError(f"expected {len(LABELS)} labels, got {len(labels)}")
        if any(v not in (0, 1) for v in labels):
            raise ValueError(f"labels must be 0/1, got {labels}")
        object.__setattr__(self, "labels", labels)

    @property
    def positive_labels(self) -> Tuple[int, ...]:
        return tuple(i for i, v in enumerate(self.labels) if v)


@dataclass
class DatasetSplit:
    """Train / validation / test lists; only `train` is ever resampled."""

    train: List[LabeledExample]
    validation: List[LabeledExample]
    test: List[LabeledExample]
    provenance: str = "original"
    notes: Dict[str, str] = field(default_factory=dict)

    def __post_init__(self):
        if self.provenance not in PROVENANCES:
            raise ConfigError(f"unknown provenance tag {self.provenance!r}")

    def check_disjoint(self) -> None:
        """
        Raises:
            ValueError: If any example id appears in two different splits
        """
        parts = {
            "train": {e.example_id for e in self.train},
            "validation": {e.example_id for e in self.validation},
            "test": {e.example_id for e in self.test},
        }
        names = list(parts)
        for i, a in enumerate(names):
            for b in names[i + 1:]:
                shared = parts[a] & parts[b]
                if shared:
                    raise ValueError(f"{a} and {b} share {len(shared)} examples, e.g. {sorted(shared)[0]}")


def read_provenance(path: Path) -> str:
    """Return the provenance tag of a dataset file (`original` when untagged)."""
    with open(path, encoding="utf-8") as f:
        first = f.readline().strip()
    if first.startswith(PROVENANCE_PREFIX):
        return first[len(PROVENANCE_PREFIX):]
    return "original"


def load_dataset(path: Path) -> List[LabeledExample]:
    """
    Parse a dataset file.

    Empty texts and duplicate texts (first occurrence kept) are dropped and
    the drops are logged.

    Args:
        path: CSV file path

    Returns:
        List of LabeledExample

    Raises:
        FileNotFoundError: If the file does not exist
        DatasetFormatError: On a bad header, a malformed row, or a non-binary label
    """
    path = Path(path)
    if not path.exists():
        raise FileNotFoundError(f"Dataset not found: {path}")

    skip = 1 if read_provenance(path) != "original" else 0
    try:
        frame = pd.read_csv(path, dtype=str, keep_default_na=False, skiprows=skip, encoding="utf-8")
    except pd.errors.EmptyDataError as e:
        raise DatasetFormatError("file is empty", line=1 + skip) from e
    except pd.errors.ParserError as e:
        match = _PANDAS_LINE.search(str(e))
        line = int(match.group(1)) + skip if match else None
        raise DatasetFormatError(f"malformed row ({e})", line=line) from e

    if tuple(frame.columns) != HEADER:
        raise DatasetFormatError(
            f"header must be {','.join(HEADER)}, got {','.join(map(str, frame.columns))}", line=1 + skip
        )

    examples = []
    seen = set()
    dropped_empty = dropped_duplicate = 0
    for offset, row in enumerate(frame.itertuples(index=False)):
        line = offset + 2 + skip
        values = []
        for name, raw in zip(LABELS, row[1:]):
            value = "" if raw is None or (isinstance(raw, float) and np.isnan(raw)) else str(raw).strip()
            if value not in ("0", "1"):
                raise DatasetFormatError(f"label {name!r} must be 0 or 1, got {value!r}", line=line)
            values.append(int(value))
        text = str(row[0]).strip()
        if not text:
            dropped_empty += 1
            continue
        if text in seen:
            dropped_duplicate += 1
            continue
        seen.add(text)
        examples.append(LabeledExample(text=text, labels=tuple(values), example_id=f"{path.stem}:{line}"))

    if dropped_empty or dropped_duplicate:
        logger.info(f"{path.name}: dropped {dropped_empty} empty and {dropped_duplicate} duplicate rows")
    logger.debug(f"{path.name}: loaded {len(examples)} examples")
    return examples


def write_dataset(examples: Sequence[LabeledExample], path: Path, provenance: str = "original") -> Path:
    """
    Write examples in the dataset format; non-original files get a provenance line.

    Returns:
        The written path
    """
    if provenance not in PROVENANCES:
        raise ConfigError(f"unknown provenance tag {provenance!r}")
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    frame = pd.DataFrame(
        [(e.text,) + e.labels for e in examples],
        columns=list(HEADER),
    )
    with open(path, "w", encoding="utf-8", newline="") as f:
        if provenance != "original":
            f.write(f"{PROVENANCE_PREFIX}{provenance}\n")
        frame.to_csv(f, index=False, lineterminator="\n")
    return path


def rarest_label_keys(examples: Sequence[LabeledExample]) -> List[int]:
    """Stratum key per example: its rarest positive label, or -1 when it has none."""
    totals = np.zeros(len(LABELS), dtype=np.int64)
    for e in examples:
        totals += np.asarray(e.labels)
    keys = []
    for e in examples:
        positives = e.positive_labels
        keys.append(min(positives, key=lambda c: (totals[c], c)) if positives else -1)
    return keys


def split_dataset(
    examples: Sequence[LabeledExample],
    ratios: Sequence[float] = (0.8, 0.1, 0.1),
    rng: Optional[np.random.Generator] = None,
) -> DatasetSplit:
    """
    Stratified train/validation/test split.

    Each stratum (examples sharing a rarest positive label) is shuffled and cut
    by the ratios, so rare labels reach every split when they can.

    Args:
        examples: Deduplicated examples
        ratios: (train, validation, test) fractions summing to 1
        rng: Generator for the shuffles (the `split` stream)

    Returns:
        DatasetSplit with provenance `original`
    """
    if len(ratios) != 3 or abs(sum(ratios) - 1.0) > 1e-9:
        raise ConfigError(f"ratios must be three fractions summing to 1, got {tuple(ratios)}")
    rng = rng if rng is not None else np.random.default_rng(0)

    keys = np.asarray(rarest_label_keys(examples))
    train, validation, test = [], [], []
    for key in sorted(set(keys.tolist())):
        members = np.flatnonzero(keys == key)
        members = members[rng.permutation(len(members))]
        n = len(members)
        n_val = int(round(ratios[1] * n))
        n_test = int(round(ratios[2] * n))
        if n_val + n_test > n:
            n_test = n - n_val
        validation.extend(examples[i] for i in members[:n_val])
        test.extend(examples[i] for i in members[n_val:n_val + n_test])
        train.extend(examples[i] for i in members[n_val + n_test:])

    split = DatasetSplit(train=train, validation=validation, test=test)
    split.check_disjoint()
    return split
