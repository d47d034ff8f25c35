"""
Transformer encoder.

Input ids of shape [B, L] (or a single [L] sequence) are embedded as

    X0 = Dropout(LayerNorm(W[id] + P[pos] + E_seg[0]))

and folded through `n_layers` post-norm encoder layers:

    H1 = LayerNorm(H + Dropout(MultiHead(H)))
    H2 = LayerNorm(H1 + Dropout(GELU(H1 W_1 + b_1) W_2 + b_2))

Attention projections W_Q, W_K, W_V, W_O carry no bias. Padded key positions
get exactly zero attention weight.

Parameter count for a config (V vocab, L max_len, S segments, d model width,
f feed-forward width, N layers):

    V*d + L*d + S*d + 2*d + N * (4*d*d + d*f + f + f*d + d + 4*d)
"""

import logging
import math
from dataclasses import asdict, dataclass, field, replace
from typing import Dict, List, Optional, Tuple, Union

import numpy as np

from src.autograd import Tensor
from src.autograd import functional as F
from src.exceptions import ConfigError, DimensionError

logger = logging.getLogger(__name__)

INIT_STD = 0.02

PRESETS: Dict[str, Dict[str, int]] = {
    "desk": {"n_layers": 2, "d_model": 32, "n_heads": 4, "d_ff": 64, "max_len": 16},
    "paper": {"n_layers": 24, "d_model": 1024, "n_heads": 16, "d_ff": 4096, "max_len": 64},
}

LAYER_PARAMS = (
    "W_Q", "W_K", "W_V", "W_O", "W_1", "b_1", "W_2", "b_2",
    "norm1.gain", "norm1.bias", "norm2.gain", "norm2.bias",
)


@dataclass(frozen=True)
class EncoderConfig:
    """Encoder dimensions; `d_model` must be divisible by `n_heads`."""

    n_layers: int
    d_model: int
    n_heads: int
    d_ff: int
    max_len: int
    vocab_size: int
    dropout_p: float = 0.1
    n_segments: int = 1

    def __post_init__(self):
        if self.n_layers < 0:
            raise ConfigError(f"n_layers must be >= 0, got {self.n_layers}")
        if self.d_model < 1 or self.n_heads < 1 or self.d_model % self.n_heads:
            raise ConfigError(f"d_model {self.d_model} must be a positive multiple of n_heads {self.n_heads}")
        if self.d_ff < 1:
            raise ConfigError(f"d_ff must be positive, got {self.d_ff}")
        if self.max_len < 2:
            raise ConfigError(f"max_len must be at least 2, got {self.max_len}")
        if self.vocab_size < 1:
            raise ConfigError(f"vocab_size must be positive, got {self.vocab_size}")
        if not 0.0 <= self.dropout_p < 1.0:
            raise ConfigError(f"dropout_p must be in [0, 1), got {self.dropout_p}")
        if self.n_segments < 1:
            raise ConfigError(f"n_segments must be >= 1, got {self.n_segments}")

    @property
    def head_dim(self) -> int:
        return self.d_model // self.n_heads

    @classmethod
    def from_preset(cls, name: str, vocab_size: int, **overrides) -> "EncoderConfig":
        """
        Build a config from a named preset, with explicit dims taking priority.

        Raises:
            ConfigError: If the preset name is unknown
        """
        if name not in PRESETS:
            raise ConfigError(f"unknown encoder preset {name!r}; choose from {', '.join(PRESETS)}")
        values = dict(PRESETS[name])
        values.update({k: v for k, v in overrides.items() if v is not None})
        return cls(vocab_size=vocab_size, **values)

    def with_vocab_size(self, vocab_size: int) -> "EncoderConfig":
        return replace(self, vocab_size=vocab_size)

    def to_dict(self) -> Dict:
        return asdict(self)


def encoder_parameter_shapes(config: EncoderConfig) -> List[Tuple[str, Tuple[int, ...]]]:
    """Registry names and shapes of every encoder parameter, in registry order."""
    d, f = config.d_model, config.d_ff
    shapes = [
        ("token_embedding", (config.vocab_size, d)),
        ("position_embedding", (config.max_len, d)),
        ("segment_embedding", (config.n_segments, d)),
        ("embedding_norm.gain", (d,)),
        ("embedding_norm.bias", (d,)),
    ]
    layer_shapes = {
        "W_Q": (d, d), "W_K": (d, d), "W_V": (d, d), "W_O": (d, d),
        "W_1": (d, f), "b_1": (f,), "W_2": (f, d), "b_2": (d,),
        "norm1.gain": (d,), "norm1.bias": (d,), "norm2.gain": (d,), "norm2.bias": (d,),
    }
    for i in range(config.n_layers):
        shapes.extend((f"layers.{i}.{name}", layer_shapes[name]) for name in LAYER_PARAMS)
    return shapes


def encoder_parameter_count(config: EncoderConfig) -> int:
    """Closed-form parameter count (see module docstring)."""
    V, L, S = config.vocab_size, config.max_len, config.n_segments
    d, f, N = config.d_model, config.d_ff, config.n_layers
    return V * d + L * d + S * d + 2 * d + N * (4 * d * d + d * f + f + f * d + d + 4 * d)


def truncated_normal(rng: np.random.Generator, shape: Tuple[int, ...], std: float = INIT_STD) -> np.ndarray:
    """Normal(0, std) samples redrawn until they fall within two standard deviations."""
    values = rng.standard_normal(shape)
    outside = np.abs(values) > 2.0
    while outside.any():
        values[outside] = rng.standard_normal(int(outside.sum()))
        outside = np.abs(values) > 2.0
    return values * std


@dataclass
class EncoderLayerWeights:
    """Weights of one encoder layer, keyed as in LAYER_PARAMS."""

    params: Dict[str, Tensor]

    def __getitem__(self, name: str) -> Tensor:
        return self.params[name]


@dataclass
class EncoderState:
    """
    Embedding tables plus per-layer weights.

    Tensors here are the same objects the model registry holds, so optimizer
    updates are visible without copying.
    """

    config: EncoderConfig
    token_embedding: Tensor
    position_embedding: Tensor
    segment_embedding: Tensor
    norm_gain: Tensor
    norm_bias: Tensor
    layers: List[EncoderLayerWeights] = field(default_factory=list)

    def named_parameters(self) -> List[Tuple[str, Tensor]]:
        named = [
            ("token_embedding", self.token_embedding),
            ("position_embedding", self.position_embedding),
            ("segment_embedding", self.segment_embedding),
            ("embedding_norm.gain", self.norm_gain),
            ("embedding_norm.bias", self.norm_bias),
        ]
        for i, layer in enumerate(self.layers):
            named.extend((f"layers.{i}.{name}", layer[name]) for name in LAYER_PARAMS)
        return named

    @classmethod
    def from_arrays(cls, config: EncoderConfig, arrays: Dict[str, np.ndarray]) -> "EncoderState":
        """Wrap named arrays (names as in `encoder_parameter_shapes`) into parameter tensors."""
        tensors = {name: Tensor(arrays[name], requires_grad=True, name=f"encoder.{name}")
                   for name, _ in encoder_parameter_shapes(config)}
        layers = [
            EncoderLayerWeights({name: tensors[f"layers.{i}.{name}"] for name in LAYER_PARAMS})
            for i in range(config.n_layers)
        ]
        return cls(
            config=config,
            token_embedding=tensors["token_embedding"],
            position_embedding=tensors["position_embedding"],
            segment_embedding=tensors["segment_embedding"],
            norm_gain=tensors["embedding_norm.gain"],
            norm_bias=tensors["embedding_norm.bias"],
            layers=layers,
        )


def init_encoder_state(config: EncoderConfig, rng: np.random.Generator, dtype=np.float64) -> EncoderState:
    """
    Fresh encoder weights: truncated normal (std 0.02) for tables and matrices,
    zero biases, LayerNorm gain 1 and bias 0.
    """
    arrays = {}
    for name, shape in encoder_parameter_shapes(config):
        if name.endswith(".gain"):
            arrays[name] = np.ones(shape, dtype=dtype)
        elif name.endswith(".bias") or name.split(".")[-1].startswith("b_"):
            arrays[name] = np.zeros(shape, dtype=dtype)
        else:
            arrays[name] = truncated_normal(rng, shape).astype(dtype)
    return EncoderState.from_arrays(config, arrays)


def _as_batch(ids: np.ndarray, mask: Optional[np.ndarray]) -> Tuple[np.ndarray, np.ndarray, bool]:
    ids = np.asarray(ids, dtype=np.int64)
    single = ids.ndim == 1
    if single:
        ids = ids[None, :]
    if mask is None:
        mask = np.ones_like(ids, dtype=np.int8)
    mask = np.asarray(mask)
    if mask.ndim == 1:
        mask = mask[None, :]
    if mask.shape != ids.shape:
        raise DimensionError(f"mask shape {mask.shape} does not match ids shape {ids.shape}")
    return ids, mask, single


def embed(ids: np.ndarray, state: EncoderState, training: bool, rng: Optional[np.random.Generator]) -> Tensor:
    """
    Token + position + segment embedding, LayerNorm, dropout.

    Args:
        ids: Token ids [B, L] or [L]; L must equal config.max_len
        state: Encoder weights
        training: Dropout active when True
        rng: Dropout generator (required in training mode when dropout_p > 0)

    Returns:
        Tensor [B, L, d] (or [L, d] for a single sequence)

    Raises:
        DimensionError: If the sequence length is not config.max_len
        IndexError: If an id is outside the vocabulary
    """
    config = state.config
    ids = np.asarray(ids, dtype=np.int64)
    single = ids.ndim == 1
    batch_ids = ids[None, :] if single else ids
    if batch_ids.shape[-1] != config.max_len:
        raise DimensionError(f"sequence length {batch_ids.shape[-1]} != max_len {config.max_len}")

    # single-sentence inputs always use segment 0
    summed = (
        F.embedding_lookup(state.token_embedding, batch_ids)
        + state.position_embedding
        + F.getitem(state.segment_embedding, 0)
    )
    out = F.dropout(F.layer_norm(summed, state.norm_gain, state.norm_bias), config.dropout_p, training, rng)
    return F.reshape(out, out.shape[1:]) if single else out


def _split_heads(x: Tensor, n_heads: int) -> Tensor:
    B, L, d = x.shape
    return F.transpose(F.reshape(x, (B, L, n_heads, d // n_heads)), (0, 2, 1, 3))


def encoder_layer(
    H: Tensor,
    mask: np.ndarray,
    weights: EncoderLayerWeights,
    config: EncoderConfig,
    training: bool,
    rng: Optional[np.random.Generator],
    return_attention: bool = False,
) -> Union[Tensor, Tuple[Tensor, np.ndarray]]:
    """
    One post-norm encoder layer over a batch.

    Args:
        H: Hidden states [B, L, d]
        mask: Attention mask [B, L]; 0 marks padded keys
        weights: Layer weights
        config: Encoder config (heads, dropout)
        training: Dropout active when True
        rng: Dropout generator
        return_attention: Also return the attention weights [B, heads, L, L]

    Raises:
        DimensionError: If the mask does not cover the L positions
    """
    B, L, d = H.shape
    mask = np.asarray(mask)
    if mask.ndim == 1:
        mask = mask[None, :]
    if mask.shape != (B, L):
        raise DimensionError(f"mask shape {mask.shape} does not match hidden states {(B, L)}")

    q = _split_heads(H @ weights["W_Q"], config.n_heads)
    k = _split_heads(H @ weights["W_K"], config.n_heads)
    v = _split_heads(H @ weights["W_V"], config.n_heads)
    scores = (q @ F.transpose(k)) * (1.0 / math.sqrt(config.head_dim))
    attention = F.softmax_lastdim(scores, mask[:, None, None, :])
    context = F.reshape(F.transpose(attention @ v, (0, 2, 1, 3)), (B, L, d))
    attended = context @ weights["W_O"]

    h1 = F.layer_norm(
        H + F.dropout(attended, config.dropout_p, training, rng),
        weights["norm1.gain"], weights["norm1.bias"],
    )
    hidden = F.gelu(h1 @ weights["W_1"] + weights["b_1"])
    ffn = hidden @ weights["W_2"] + weights["b_2"]
    h2 = F.layer_norm(
        h1 + F.dropout(ffn, config.dropout_p, training, rng),
        weights["norm2.gain"], weights["norm2.bias"],
    )
    if return_attention:
        return h2, attention.data
    return h2


def encode_sequence(
    ids: np.ndarray,
    mask: Optional[np.ndarray],
    state: EncoderState,
    training: bool,
    rng: Optional[np.random.Generator],
) -> Tensor:
    """
    Embed then fold through every encoder layer.

    Returns:
        Token-level representations [B, L, d] ([L, d] for a single sequence);
        with zero layers this is the embedding output
    """
    batch_ids, batch_mask, single = _as_batch(ids, mask)
    H = embed(batch_ids, state, training, rng)
    for layer in state.layers:
        H = encoder_layer(H, batch_mask, layer, state.config, training, rng)
    return F.reshape(H, H.shape[1:]) if single else H
