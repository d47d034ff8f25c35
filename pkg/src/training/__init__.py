"""
Model training.
"""

from src.training.trainer import EncodedSplit, EpochRecord, Trainer, TrainingResult, encode_examples

__all__ = ["EncodedSplit", "EpochRecord", "Trainer", "TrainingResult", "encode_examples"]
