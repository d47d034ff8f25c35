"""
Run configuration loading.

Defaults live in config/default_config.json (nested by section). A run-config
file is flat YAML key-value text whose keys map onto those sections, and CLI
flags override both.
"""

import copy
import json
import logging
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Dict, Mapping, Optional, Tuple

import yaml

from src.exceptions import ConfigError

logger = logging.getLogger(__name__)

DEFAULT_CONFIG_PATH = Path(__file__).resolve().parent.parent / "config" / "default_config.json"

SAMPLING_MODES = ("none", "under", "over")

# flat run-config key -> (section, key)
FLAT_KEYS: Dict[str, Tuple[str, str]] = {
    "dataset": ("data", "path"),
    "train_file": ("data", "train_path"),
    "validation_file": ("data", "validation_path"),
    "test_file": ("data", "test_path"),
    "split_ratios": ("split", "ratios"),
    "sampling": ("sampling", "mode"),
    "preset": ("encoder", "preset"),
    "n_layers": ("encoder", "n_layers"),
    "d_model": ("encoder", "d_model"),
    "n_heads": ("encoder", "n_heads"),
    "d_ff": ("encoder", "d_ff"),
    "max_len": ("encoder", "max_len"),
    "encoder_dropout": ("encoder", "dropout_p"),
    "freeze_bottom_k": ("encoder", "freeze_bottom_k"),
    "lstm_hidden": ("lstm", "hidden_dim"),
    "lstm_layers": ("lstm", "n_layers"),
    "lstm_dropout": ("lstm", "interlayer_dropout_p"),
    "readout": ("lstm", "readout"),
    "head_dropout": ("head", "dropout_p"),
    "threshold": ("head", "threshold"),
    "epochs": ("training", "epochs"),
    "batch_size": ("training", "batch_size"),
    "eval_batch_size": ("training", "eval_batch_size"),
    "dtype": ("training", "dtype"),
    "lr": ("optimizer", "lr"),
    "weight_decay": ("optimizer", "weight_decay"),
    "betas": ("optimizer", "betas"),
    "eps": ("optimizer", "eps"),
    "warmup_ratio": ("optimizer", "warmup_ratio"),
    "clip_norm": ("optimizer", "clip_norm"),
    "decay_bias_and_norm": ("optimizer", "decay_bias_and_norm"),
    "max_vocab_size": ("tokenizer", "max_vocab_size"),
    "min_freq": ("tokenizer", "min_freq"),
    "stopwords": ("cleaning", "stopwords_path"),
    "abbreviations": ("cleaning", "abbreviations_path"),
    "max_char_repeat": ("cleaning", "max_char_repeat"),
    "n_samples": ("explain", "n_samples"),
    "kernel_width": ("explain", "kernel_width"),
    "k": ("crossval", "k"),
    "workers": ("crossval", "workers"),
    "output_dir": ("output", "directory"),
}


@dataclass
class RunConfig:
    """
    Fully resolved settings of one command invocation.

    `settings` is the nested section dictionary; `seed` is mandatory and has no
    wall-clock default.
    """

    seed: int
    settings: Dict[str, Dict[str, Any]] = field(default_factory=dict)

    def section(self, name: str) -> Dict[str, Any]:
        """Return a section dictionary (empty if absent)."""
        return self.settings.get(name, {})

    def get(self, section: str, key: str, default: Any = None) -> Any:
        value = self.section(section).get(key)
        return default if value is None else value

    @property
    def sampling_mode(self) -> str:
        return self.get("sampling", "mode", "none")

    @property
    def output_dir(self) -> Path:
        return Path(self.get("output", "directory", "runs/latest"))

    def validate(self) -> "RunConfig":
        """
        Check cross-field invariants.

        Raises:
            ConfigError: If a value is out of range
        """
        if self.seed is None:
            raise ConfigError("a seed is required")
        if int(self.seed) < 0:
            raise ConfigError(f"seed must be non-negative, got {self.seed}")
        if self.sampling_mode not in SAMPLING_MODES:
            raise ConfigError(
                f"sampling mode must be one of {', '.join(SAMPLING_MODES)}, got {self.sampling_mode!r}"
            )
        ratios = self.get("split", "ratios", [0.8, 0.1, 0.1])
        if len(ratios) != 3 or any(r < 0 for r in ratios) or abs(sum(ratios) - 1.0) > 1e-9:
            raise ConfigError(f"split ratios must be three non-negative values summing to 1, got {ratios}")
        epochs = self.get("training", "epochs")
        if epochs is not None and int(epochs) < 0:
            raise ConfigError(f"epochs must be >= 0, got {epochs}")
        if int(self.get("training", "batch_size", 32)) < 1:
            raise ConfigError("batch_size must be >= 1")
        return self


def load_default_config(path: Optional[Path] = None) -> Dict[str, Dict[str, Any]]:
    """Load the nested default configuration."""
    path = Path(path) if path else DEFAULT_CONFIG_PATH
    with open(path, encoding="utf-8") as f:
        return json.load(f)


def read_run_config_file(path: Path) -> Dict[str, Any]:
    """
    Read a flat key-value run-config file.

    Args:
        path: YAML file with one `key: value` pair per line

    Returns:
        Dictionary of flat keys

    Raises:
        ConfigError: If the file is not a flat mapping
    """
    with open(path, encoding="utf-8") as f:
        try:
            data = yaml.safe_load(f) or {}
        except yaml.YAMLError as e:
            raise ConfigError(f"cannot parse config file {path}: {e}") from e
    if not isinstance(data, dict):
        raise ConfigError(f"config file {path} must contain key-value pairs")
    for key, value in data.items():
        if isinstance(value, dict):
            raise ConfigError(f"config file {path}: key {key!r} must be flat, found a nested mapping")
    return data


def apply_flat_overrides(settings: Dict[str, Dict[str, Any]], flat: Mapping[str, Any]) -> None:
    """Write flat keys into their sections in place; None values are ignored."""
    for key, value in flat.items():
        if value is None or key == "seed":
            continue
        if key not in FLAT_KEYS:
            raise ConfigError(f"unknown configuration key: {key!r}")
        section, name = FLAT_KEYS[key]
        settings.setdefault(section, {})[name] = value


def build_run_config(
    seed: Optional[int],
    config_path: Optional[Path] = None,
    overrides: Optional[Mapping[str, Any]] = None,
    defaults_path: Optional[Path] = None,
) -> RunConfig:
    """
    Resolve defaults, the optional run-config file, and CLI overrides.

    Args:
        seed: Mandatory seed (a `seed` key in the file is used when this is None)
        config_path: Optional flat YAML run-config file
        overrides: Flat keys from command-line flags
        defaults_path: Alternative defaults JSON

    Returns:
        Validated RunConfig
    """
    settings = copy.deepcopy(load_default_config(defaults_path))
    file_values: Dict[str, Any] = {}
    if config_path:
        file_values = read_run_config_file(Path(config_path))
        apply_flat_overrides(settings, file_values)
    if overrides:
        apply_flat_overrides(settings, overrides)

    if seed is None:
        seed = file_values.get("seed")
    if seed is None:
        raise ConfigError("--seed is required (no wall-clock default)")

    logger.debug(f"Resolved configuration with seed {seed}")
    return RunConfig(seed=int(seed), settings=settings).validate()
