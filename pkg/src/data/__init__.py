"""
Dataset ingestion, splitting, resampling and synthetic data.
"""

from src.data.dataset import (
    DatasetSplit,
    LabeledExample,
    load_dataset,
    read_provenance,
    split_dataset,
    write_dataset,
)
from src.data.sampling import (
    ClassCounts,
    class_counts,
    kfold_partition,
    oversample,
    resample,
    resampling_table,
    undersample,
)
from src.data.synthetic import PLANTED_TOKENS, generate_planted_corpus, planted_comment

__all__ = [
    "DatasetSplit",
    "LabeledExample",
    "load_dataset",
    "read_provenance",
    "split_dataset",
    "write_dataset",
    "ClassCounts",
    "class_counts",
    "kfold_partition",
    "oversample",
    "resample",
    "resampling_table",
    "undersample",
    "PLANTED_TOKENS",
    "generate_planted_corpus",
    "planted_comment",
]
