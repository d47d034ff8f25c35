"""Tests for run-config resolution and the named random streams."""

import numpy as np
import pytest

from src.config import build_run_config
from src.exceptions import ConfigError
from src.rng import RngStreams


def test_seed_is_mandatory():
    with pytest.raises(ConfigError):
        build_run_config(None)


def test_defaults_and_overrides():
    config = build_run_config(7, overrides={"lr": 1e-4, "sampling": "over", "readout": "last_unmasked"})
    assert config.seed == 7
    assert config.get("optimizer", "lr") == 1e-4
    assert config.get("optimizer", "weight_decay") == 0.01
    assert config.sampling_mode == "over"
    assert config.get("lstm", "readout") == "last_unmasked"
    assert config.get("training", "epochs") is None


def test_file_values_and_precedence(tmp_path):
    path = tmp_path / "run.yaml"
    path.write_text("seed: 5\nepochs: 3\nlr: 0.001\nsplit_ratios: [0.6, 0.2, 0.2]\n", encoding="utf-8")
    config = build_run_config(None, path, overrides={"lr": 0.01})
    assert config.seed == 5
    assert config.get("training", "epochs") == 3
    assert config.get("optimizer", "lr") == 0.01
    assert config.get("split", "ratios") == [0.6, 0.2, 0.2]
    assert build_run_config(9, path).seed == 9


@pytest.mark.parametrize("content", ["encoder:\n  d_model: 8\n", "colour: blue\n", "- a\n- b\n"])
def test_malformed_files(tmp_path, content):
    path = tmp_path / "run.yaml"
    path.write_text(content, encoding="utf-8")
    with pytest.raises(ConfigError):
        build_run_config(1, path)


@pytest.mark.parametrize("overrides", [
    {"sampling": "smote"},
    {"split_ratios": [0.5, 0.5, 0.5]},
    {"epochs": -1},
    {"batch_size": 0},
])
def test_invalid_values(overrides):
    with pytest.raises(ConfigError):
        build_run_config(1, overrides=overrides)


def test_negative_seed():
    with pytest.raises(ConfigError):
        build_run_config(-3)


class TestRngStreams:
    def test_streams_are_cached_and_reproducible(self):
        streams = RngStreams(11)
        assert streams.stream("init") is streams.stream("init")
        a = RngStreams(11).stream("init").normal(size=4)
        b = RngStreams(11).fresh("init").normal(size=4)
        np.testing.assert_array_equal(a, b)

    def test_streams_are_independent(self):
        streams = RngStreams(11)
        assert not np.array_equal(streams.fresh("init").normal(size=4), streams.fresh("dropout").normal(size=4))
        assert not np.array_equal(streams.fresh("init").normal(size=4), streams.child(0).fresh("init").normal(size=4))
        assert streams.child(2).seed == RngStreams(11).child(2).seed

    def test_rejects_negative_seed(self):
        with pytest.raises(ValueError):
            RngStreams(-1)
