"""Shared fixtures and the finite-difference gradient helper."""

from pathlib import Path
from typing import Callable, Iterable, Optional, Tuple

import numpy as np
import pytest

from src.models.encoder import EncoderConfig
from src.models.hybrid import HybridModel, ModelConfig
from src.models.recurrent import LstmConfig
from src.text.vocabulary import Vocabulary, build_vocab

FIXTURES = Path(__file__).parent / "fixtures"


def numeric_grad(
    f: Callable[[], float],
    array: np.ndarray,
    h: float = 1e-5,
    indices: Optional[Iterable[Tuple[int, ...]]] = None,
) -> np.ndarray:
    """Central differences of scalar `f()` with respect to entries of `array` (perturbed in place)."""
    grad = np.zeros_like(array, dtype=np.float64)
    for idx in (indices if indices is not None else np.ndindex(array.shape)):
        original = array[idx]
        array[idx] = original + h
        plus = f()
        array[idx] = original - h
        minus = f()
        array[idx] = original
        grad[idx] = (plus - minus) / (2 * h)
    return grad


def max_rel_error(analytic: np.ndarray, numeric: np.ndarray, floor: float = 1e-3) -> float:
    analytic = np.asarray(analytic, dtype=np.float64)
    numeric = np.asarray(numeric, dtype=np.float64)
    scale = np.maximum(np.abs(analytic) + np.abs(numeric), floor)
    return float(np.max(np.abs(analytic - numeric) / scale))


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


@pytest.fixture
def fixture_csv() -> Path:
    return FIXTURES / "comments.csv"


@pytest.fixture
def small_vocab() -> Vocabulary:
    corpus = ["you are an idiot", "send nude photos", "i will kill you", "win the lottery now", "nice song"]
    return build_vocab(corpus, max_size=200)


def tiny_model_config(vocab_size: int = 20, max_len: int = 6, readout: str = "last_step",
                      dropout: float = 0.0) -> ModelConfig:
    encoder = EncoderConfig(n_layers=1, d_model=8, n_heads=2, d_ff=16, max_len=max_len,
                            vocab_size=vocab_size, dropout_p=dropout)
    lstm = LstmConfig(input_dim=8, hidden_dim=4, n_layers=2, interlayer_dropout_p=dropout, readout=readout)
    return ModelConfig(encoder=encoder, lstm=lstm, head_dropout_p=dropout)


@pytest.fixture
def tiny_model() -> HybridModel:
    return HybridModel.initialize(tiny_model_config(), np.random.default_rng(7))


@pytest.fixture
def tiny_batch() -> Tuple[np.ndarray, np.ndarray, np.ndarray]:
    """(ids, mask, targets) for three sequences of length 6 over a 20-token vocabulary."""
    ids = np.array([
        [2, 5, 9, 3, 0, 0],
        [2, 7, 3, 0, 0, 0],
        [2, 11, 12, 13, 14, 3],
    ])
    mask = (ids != 0).astype(np.int8)
    targets = np.array([
        [1, 0, 0, 0, 0],
        [0, 1, 0, 1, 0],
        [0, 0, 0, 0, 1],
    ])
    return ids, mask, targets
