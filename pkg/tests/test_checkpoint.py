"""Tests for checkpoint persistence."""

from dataclasses import replace

import numpy as np
import pytest

from src.exceptions import CheckpointShapeError, CheckpointTruncatedError, CheckpointVersionError
from src.models import HybridModel, load_checkpoint, load_checkpoint_with_vocab, save_checkpoint
from src.text import build_vocab
from tests.conftest import tiny_model_config


@pytest.fixture
def saved(tiny_model, tmp_path):
    return save_checkpoint(tiny_model, tmp_path / "model.ckpt")


def test_round_trip_is_bit_identical(tiny_model, tiny_batch, saved):
    ids, mask, _ = tiny_batch
    restored = load_checkpoint(saved)
    assert restored.config == tiny_model.config
    assert list(restored.registry) == list(tiny_model.registry)
    np.testing.assert_array_equal(restored.forward((ids, mask)).data, tiny_model.forward((ids, mask)).data)


def test_float32_round_trip(tmp_path):
    config = tiny_model_config()
    model = HybridModel.initialize(replace(config, dtype="float32"), np.random.default_rng(2))
    restored = load_checkpoint(save_checkpoint(model, tmp_path / "m.ckpt"))
    assert restored.registry["head.W_clf"].dtype == np.float32
    np.testing.assert_array_equal(restored.registry["head.W_clf"].data, model.registry["head.W_clf"].data)


def test_vocabulary_travels_with_checkpoint(tmp_path):
    vocab = build_vocab(["ab cd", "ef"], max_size=20)
    model = HybridModel.initialize(tiny_model_config(vocab_size=len(vocab)), np.random.default_rng(3))
    path = save_checkpoint(model, tmp_path / "run" / "model.ckpt", vocab)
    assert (tmp_path / "run" / "vocab.txt").exists()
    _, loaded = load_checkpoint_with_vocab(path)
    assert loaded == vocab


def test_vocabulary_size_mismatch(tiny_model, tmp_path):
    path = save_checkpoint(tiny_model, tmp_path / "model.ckpt", build_vocab(["ab"], max_size=20))
    with pytest.raises(CheckpointShapeError):
        load_checkpoint_with_vocab(path)


def test_bad_magic(saved):
    saved.write_bytes(b"XXXX" + saved.read_bytes()[4:])
    with pytest.raises(CheckpointVersionError):
        load_checkpoint(saved)


def test_unknown_version(saved):
    data = saved.read_bytes()
    saved.write_bytes(data[:4] + (99).to_bytes(2, "little") + data[6:])
    with pytest.raises(CheckpointVersionError):
        load_checkpoint(saved)


def test_truncated(saved):
    data = saved.read_bytes()
    saved.write_bytes(data[: len(data) - 7])
    with pytest.raises(CheckpointTruncatedError):
        load_checkpoint(saved)


def test_shape_mismatch(saved):
    data = saved.read_bytes()
    assert b"encoder.vocab_size=20\n" in data
    saved.write_bytes(data.replace(b"encoder.vocab_size=20\n", b"encoder.vocab_size=21\n"))
    with pytest.raises(CheckpointShapeError):
        load_checkpoint(saved)


def test_missing_file(tmp_path):
    with pytest.raises(FileNotFoundError):
        load_checkpoint(tmp_path / "none.ckpt")


def test_no_temporary_files_left(saved):
    assert [p.name for p in saved.parent.iterdir()] == ["model.ckpt"]
