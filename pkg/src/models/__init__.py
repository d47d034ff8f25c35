"""
Model components: transformer encoder, stacked LSTM, hybrid classifier, checkpoints.
"""

from src.models.checkpoint import load_checkpoint, load_checkpoint_with_vocab, save_checkpoint
from src.models.encoder import PRESETS, EncoderConfig, EncoderState, embed, encode_sequence, encoder_layer
from src.models.hybrid import (
    HybridModel,
    ModelConfig,
    PredictionBatch,
    bce_loss,
    expected_parameter_count,
    model_config_from_settings,
    predict,
)
from src.models.recurrent import LstmConfig, LstmState, lstm_cell, run_stacked

__all__ = [
    "load_checkpoint",
    "load_checkpoint_with_vocab",
    "save_checkpoint",
    "PRESETS",
    "EncoderConfig",
    "EncoderState",
    "embed",
    "encode_sequence",
    "encoder_layer",
    "HybridModel",
    "ModelConfig",
    "PredictionBatch",
    "bce_loss",
    "expected_parameter_count",
    "model_config_from_settings",
    "predict",
    "LstmConfig",
    "LstmState",
    "lstm_cell",
    "run_stacked",
]
