"""
Hybrid encoder + stacked LSTM multilabel classifier.

forward: encode_sequence -> run_stacked -> Dropout(0.3) -> h W_clf^T + b_clf

Every trainable tensor lives in one flat, ordered registry
(`encoder.*`, `lstm.*`, `head.*`), which the optimizer, checkpointing and
gradient checks all walk.
"""

import logging
from collections import OrderedDict
from dataclasses import dataclass, field
from typing import Any, Dict, Iterable, List, Mapping, Optional, Sequence, Tuple, Union

import numpy as np

from src import LABELS
from src.autograd import Tensor, no_grad
from src.autograd import functional as F
from src.exceptions import ConfigError, DimensionError
from src.models.encoder import (
    EncoderConfig,
    EncoderState,
    encode_sequence,
    encoder_parameter_count,
    encoder_parameter_shapes,
    init_encoder_state,
    truncated_normal,
)
from src.models.recurrent import (
    LstmConfig,
    LstmState,
    init_lstm_state,
    lstm_parameter_count,
    lstm_parameter_shapes,
    run_stacked,
)
from src.text.tokenizer import TokenizedSequence

logger = logging.getLogger(__name__)

LSTM_PRESETS = {"desk": 16, "paper": 256}
DTYPES = {"float64": np.float64, "float32": np.float32}


@dataclass(frozen=True)
class ModelConfig:
    """Complete architecture description; enough to rebuild a model from a checkpoint."""

    encoder: EncoderConfig
    lstm: LstmConfig
    n_labels: int = len(LABELS)
    head_dropout_p: float = 0.3
    threshold: float = 0.5
    dtype: str = "float64"
    labels: Tuple[str, ...] = field(default=LABELS)

    def __post_init__(self):
        if self.lstm.input_dim != self.encoder.d_model:
            raise ConfigError(f"LSTM input_dim {self.lstm.input_dim} must equal d_model {self.encoder.d_model}")
        if self.n_labels != len(self.labels):
            raise ConfigError(f"n_labels {self.n_labels} does not match {len(self.labels)} label names")
        if not 0.0 <= self.head_dropout_p < 1.0:
            raise ConfigError(f"head dropout must be in [0, 1), got {self.head_dropout_p}")
        if self.dtype not in DTYPES:
            raise ConfigError(f"dtype must be one of {', '.join(DTYPES)}, got {self.dtype!r}")

    @property
    def np_dtype(self):
        return DTYPES[self.dtype]

    def to_flat(self) -> Dict[str, str]:
        """Text key-value form used in the checkpoint config block."""
        flat = {f"encoder.{k}": str(v) for k, v in self.encoder.to_dict().items()}
        flat.update({f"lstm.{k}": str(v) for k, v in self.lstm.to_dict().items()})
        flat.update({
            "head.n_labels": str(self.n_labels),
            "head.dropout_p": repr(self.head_dropout_p),
            "head.threshold": repr(self.threshold),
            "head.labels": ",".join(self.labels),
            "dtype": self.dtype,
        })
        return flat

    @classmethod
    def from_flat(cls, flat: Mapping[str, str]) -> "ModelConfig":
        """
        Inverse of `to_flat`.

        Raises:
            ConfigError: If a key is missing or a value does not parse
        """
        try:
            encoder = EncoderConfig(
                n_layers=int(flat["encoder.n_layers"]),
                d_model=int(flat["encoder.d_model"]),
                n_heads=int(flat["encoder.n_heads"]),
                d_ff=int(flat["encoder.d_ff"]),
                max_len=int(flat["encoder.max_len"]),
                vocab_size=int(flat["encoder.vocab_size"]),
                dropout_p=float(flat["encoder.dropout_p"]),
                n_segments=int(flat["encoder.n_segments"]),
            )
            lstm = LstmConfig(
                input_dim=int(flat["lstm.input_dim"]),
                hidden_dim=int(flat["lstm.hidden_dim"]),
                n_layers=int(flat["lstm.n_layers"]),
                interlayer_dropout_p=float(flat["lstm.interlayer_dropout_p"]),
                readout=flat["lstm.readout"],
            )
            return cls(
                encoder=encoder,
                lstm=lstm,
                n_labels=int(flat["head.n_labels"]),
                head_dropout_p=float(flat["head.dropout_p"]),
                threshold=float(flat["head.threshold"]),
                dtype=flat["dtype"],
                labels=tuple(flat["head.labels"].split(",")),
            )
        except KeyError as e:
            raise ConfigError(f"model config lacks key {e.args[0]!r}") from e
        except ValueError as e:
            raise ConfigError(f"model config value does not parse: {e}") from e


def model_config_from_settings(settings: Mapping[str, Mapping[str, Any]], vocab_size: int) -> ModelConfig:
    """
    Build a ModelConfig from the nested run settings.

    Explicit dims in the `encoder` section override the named preset; the
    LSTM hidden size defaults to the preset's.
    """
    enc = settings.get("encoder", {})
    preset = enc.get("preset") or "desk"
    encoder = EncoderConfig.from_preset(
        preset,
        vocab_size=vocab_size,
        n_layers=enc.get("n_layers"),
        d_model=enc.get("d_model"),
        n_heads=enc.get("n_heads"),
        d_ff=enc.get("d_ff"),
        max_len=enc.get("max_len"),
        dropout_p=enc.get("dropout_p"),
        n_segments=enc.get("n_segments"),
    )
    lstm_section = settings.get("lstm", {})
    hidden = lstm_section.get("hidden_dim") or LSTM_PRESETS.get(preset, LSTM_PRESETS["desk"])
    lstm = LstmConfig(
        input_dim=encoder.d_model,
        hidden_dim=int(hidden),
        n_layers=int(lstm_section.get("n_layers", 2)),
        interlayer_dropout_p=float(lstm_section.get("interlayer_dropout_p", 0.3)),
        readout=lstm_section.get("readout") or "last_step",
    )
    head = settings.get("head", {})
    return ModelConfig(
        encoder=encoder,
        lstm=lstm,
        head_dropout_p=float(head.get("dropout_p", 0.3)),
        threshold=float(head.get("threshold", 0.5)),
        dtype=settings.get("training", {}).get("dtype") or "float64",
    )


def head_parameter_shapes(config: ModelConfig) -> List[Tuple[str, Tuple[int, ...]]]:
    return [("W_clf", (config.n_labels, config.lstm.hidden_dim)), ("b_clf", (config.n_labels,))]


def parameter_shapes(config: ModelConfig) -> List[Tuple[str, Tuple[int, ...]]]:
    """Registry names and shapes in registry order, computed without allocating weights."""
    shapes = [(f"encoder.{n}", s) for n, s in encoder_parameter_shapes(config.encoder)]
    shapes += [(f"lstm.{n}", s) for n, s in lstm_parameter_shapes(config.lstm)]
    shapes += [(f"head.{n}", s) for n, s in head_parameter_shapes(config)]
    return shapes


def expected_parameter_count(config: ModelConfig) -> int:
    """Closed-form total: encoder + LSTM + K*hidden + K."""
    return (
        encoder_parameter_count(config.encoder)
        + lstm_parameter_count(config.lstm)
        + config.n_labels * config.lstm.hidden_dim
        + config.n_labels
    )


@dataclass(frozen=True, eq=False)
class PredictionBatch:
    """Logits, probabilities and thresholded labels for a batch."""

    logits: np.ndarray
    probabilities: np.ndarray
    labels: np.ndarray
    threshold: float


def predict(logits: Union[Tensor, np.ndarray], threshold: float = 0.5) -> PredictionBatch:
    """
    Independent per-label sigmoid and inclusive thresholding (p >= threshold -> 1).

    Several labels may fire on the same example.
    """
    z = logits.data if isinstance(logits, Tensor) else np.asarray(logits, dtype=np.float64)
    probabilities = F.sigmoid(Tensor(z)).data
    labels = (probabilities >= threshold).astype(np.int64)
    return PredictionBatch(logits=z, probabilities=probabilities, labels=labels, threshold=threshold)


def bce_loss(logits: Tensor, targets: np.ndarray) -> Tensor:
    """
    Binary cross-entropy, summed over labels and averaged over the batch (1/B, not 1/(B*K)).

    Raises:
        ValueError: If a target is not 0 or 1
        DimensionError: If targets and logits differ in shape
    """
    targets = np.asarray(targets)
    if not np.isin(targets, (0, 1)).all():
        raise ValueError("BCE targets must be binary")
    return F.binary_cross_entropy_with_logits(logits, targets)


def batch_arrays(batch: Sequence[TokenizedSequence]) -> Tuple[np.ndarray, np.ndarray]:
    """Stack TokenizedSequences into ids [B, L] and mask [B, L]."""
    if len(batch) == 0:
        raise DimensionError("cannot run the model on an empty batch")
    lengths = {len(s) for s in batch}
    if len(lengths) != 1:
        raise DimensionError(f"sequences in a batch must share one length, got {sorted(lengths)}")
    return np.stack([s.ids for s in batch]), np.stack([s.mask for s in batch])


class HybridModel:
    """
    Encoder + stacked LSTM + linear head over K labels.

    The registry is an OrderedDict of name -> Tensor covering every parameter
    exactly once; `frozen` names are excluded from `trainable_parameters`.
    """

    def __init__(self, config: ModelConfig, encoder: EncoderState, lstm: LstmState, W_clf: Tensor, b_clf: Tensor):
        self.config = config
        self.encoder = encoder
        self.lstm = lstm
        self.W_clf = W_clf
        self.b_clf = b_clf
        self.frozen: set = set()
        self.registry: "OrderedDict[str, Tensor]" = OrderedDict()
        for name, tensor in encoder.named_parameters():
            self._register(f"encoder.{name}", tensor)
        for name, tensor in lstm.named_parameters():
            self._register(f"lstm.{name}", tensor)
        self._register("head.W_clf", W_clf)
        self._register("head.b_clf", b_clf)

    def _register(self, name: str, tensor: Tensor) -> None:
        if name in self.registry:
            raise ConfigError(f"parameter {name} registered twice")
        if any(tensor is t for t in self.registry.values()):
            raise ConfigError(f"tensor for {name} is already registered under another name")
        tensor.name = name
        self.registry[name] = tensor

    @classmethod
    def initialize(cls, config: ModelConfig, rng: np.random.Generator) -> "HybridModel":
        """Fresh weights drawn from `rng` (the `init` stream)."""
        dtype = config.np_dtype
        encoder = init_encoder_state(config.encoder, rng, dtype)
        lstm = init_lstm_state(config.lstm, rng, dtype)
        W_clf = Tensor(truncated_normal(rng, (config.n_labels, config.lstm.hidden_dim)).astype(dtype), requires_grad=True)
        b_clf = Tensor(np.zeros(config.n_labels, dtype=dtype), requires_grad=True)
        model = cls(config, encoder, lstm, W_clf, b_clf)
        logger.debug(f"initialized model with {model.parameter_count():,} parameters")
        return model

    @classmethod
    def from_arrays(cls, config: ModelConfig, arrays: Mapping[str, np.ndarray]) -> "HybridModel":
        """Build a model whose registry holds the given arrays (names as in `parameter_shapes`)."""
        enc = {n[len("encoder."):]: a for n, a in arrays.items() if n.startswith("encoder.")}
        rec = {n[len("lstm."):]: a for n, a in arrays.items() if n.startswith("lstm.")}
        return cls(
            config,
            EncoderState.from_arrays(config.encoder, enc),
            LstmState.from_arrays(config.lstm, rec),
            Tensor(arrays["head.W_clf"], requires_grad=True),
            Tensor(arrays["head.b_clf"], requires_grad=True),
        )

    def named_parameters(self) -> List[Tuple[str, Tensor]]:
        return list(self.registry.items())

    def parameters(self) -> List[Tensor]:
        return list(self.registry.values())

    def trainable_parameters(self) -> List[Tuple[str, Tensor]]:
        return [(n, t) for n, t in self.registry.items() if n not in self.frozen]

    def parameter_count(self) -> int:
        return int(sum(t.size for t in self.registry.values()))

    def zero_grad(self) -> None:
        for tensor in self.registry.values():
            tensor.zero_grad()

    def freeze_bottom_k(self, k: int) -> List[str]:
        """
        Freeze the embeddings and the lowest k encoder layers (k = 0 freezes nothing).

        Returns:
            Names of the newly frozen parameters
        """
        n_layers = self.config.encoder.n_layers
        if not 0 <= k <= n_layers:
            raise ConfigError(f"freeze_bottom_k must be in [0, {n_layers}], got {k}")
        if k == 0:
            return []
        prefixes = ["encoder.token_embedding", "encoder.position_embedding", "encoder.segment_embedding",
                    "encoder.embedding_norm."]
        prefixes += [f"encoder.layers.{i}." for i in range(k)]
        newly = [n for n in self.registry if any(n.startswith(p) for p in prefixes) and n not in self.frozen]
        for name in newly:
            self.frozen.add(name)
            self.registry[name].requires_grad = False
        logger.info(f"froze {len(newly)} parameter tensors (embeddings + {k} encoder layers)")
        return newly

    def state_arrays(self) -> "OrderedDict[str, np.ndarray]":
        """Copies of every parameter array in registry order."""
        return OrderedDict((n, t.data.copy()) for n, t in self.registry.items())

    def load_state_arrays(self, arrays: Mapping[str, np.ndarray]) -> None:
        """Overwrite parameter values in place (used to restore the best snapshot)."""
        for name, tensor in self.registry.items():
            value = arrays[name]
            if value.shape != tensor.shape:
                raise DimensionError(f"{name}: snapshot shape {value.shape} != {tensor.shape}")
            tensor.data[...] = value

    def forward(
        self,
        batch: Union[Sequence[TokenizedSequence], Tuple[np.ndarray, np.ndarray]],
        training: bool = False,
        rng: Optional[np.random.Generator] = None,
    ) -> Tensor:
        """
        Logits [B, K] for a batch of encoded sequences.

        Args:
            batch: TokenizedSequences, or an (ids [B, L], mask [B, L]) pair
            training: Dropout active when True
            rng: Dropout generator (the `dropout` stream)

        Raises:
            DimensionError: On an empty batch or a length other than max_len
        """
        if isinstance(batch, tuple) and len(batch) == 2 and isinstance(batch[0], np.ndarray):
            ids, mask = batch
        else:
            ids, mask = batch_arrays(batch)
        if ids.ndim != 2 or ids.shape[0] == 0:
            raise DimensionError(f"expected a non-empty [B, L] id batch, got shape {ids.shape}")

        H = encode_sequence(ids, mask, self.encoder, training, rng)
        h_final = run_stacked(H, mask, self.lstm, training, rng)
        h_final = F.dropout(h_final, self.config.head_dropout_p, training, rng)
        return h_final @ F.transpose(self.W_clf) + self.b_clf

    def predict_batch(self, batch, threshold: Optional[float] = None) -> PredictionBatch:
        """Eval-mode forward without gradient recording, then `predict`."""
        with no_grad():
            logits = self.forward(batch, training=False)
        return predict(logits, self.config.threshold if threshold is None else threshold)

    def predict_proba(self, sequences: Sequence[TokenizedSequence], batch_size: int = 64) -> np.ndarray:
        """Probabilities [N, K] computed in eval mode, `batch_size` sequences at a time."""
        chunks = [
            self.predict_batch(sequences[start:start + batch_size]).probabilities
            for start in range(0, len(sequences), batch_size)
        ]
        if not chunks:
            return np.zeros((0, self.config.n_labels))
        return np.concatenate(chunks, axis=0)

    def summary_rows(self) -> Iterable[Tuple[str, int]]:
        """(group, parameter count) rows for console summaries."""
        groups: Dict[str, int] = OrderedDict()
        for name, tensor in self.registry.items():
            parts = name.split(".")
            group = ".".join(parts[:3]) if parts[1] == "layers" else ".".join(parts[:2])
            groups[group] = groups.get(group, 0) + tensor.size
        return groups.items()
