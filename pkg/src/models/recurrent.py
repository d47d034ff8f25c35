"""
Stacked unidirectional LSTM over encoder outputs.

Each cell acts on the concatenation [h_{t-1}, x_t]:

    f = sigmoid([h, x] W_f + b_f)      i = sigmoid([h, x] W_i + b_i)
    C~ = tanh([h, x] W_c + b_c)        o = sigmoid([h, x] W_o + b_o)
    C_t = f * C_{t-1} + i * C~         h_t = o * tanh(C_t)
"""

import logging
import math
from dataclasses import asdict, dataclass
from typing import Dict, List, Optional, Tuple

import numpy as np

from src.autograd import Tensor
from src.autograd import functional as F
from src.exceptions import ConfigError, DimensionError

logger = logging.getLogger(__name__)

GATES = ("f", "i", "c", "o")
READOUTS = ("last_step", "last_unmasked")
FORGET_BIAS = 1.0


@dataclass(frozen=True)
class LstmConfig:
    input_dim: int
    hidden_dim: int
    n_layers: int = 2
    interlayer_dropout_p: float = 0.3
    readout: str = "last_step"

    def __post_init__(self):
        if self.input_dim < 1 or self.hidden_dim < 1:
            raise ConfigError(f"LSTM dims must be positive, got input {self.input_dim}, hidden {self.hidden_dim}")
        if self.n_layers < 1:
            raise ConfigError(f"LSTM needs at least one layer, got {self.n_layers}")
        if not 0.0 <= self.interlayer_dropout_p < 1.0:
            raise ConfigError(f"interlayer_dropout_p must be in [0, 1), got {self.interlayer_dropout_p}")
        if self.readout not in READOUTS:
            raise ConfigError(f"readout must be one of {', '.join(READOUTS)}, got {self.readout!r}")

    def layer_input_dim(self, layer: int) -> int:
        return self.input_dim if layer == 0 else self.hidden_dim

    def to_dict(self) -> Dict:
        return asdict(self)


def lstm_parameter_shapes(config: LstmConfig) -> List[Tuple[str, Tuple[int, ...]]]:
    shapes = []
    for layer in range(config.n_layers):
        width = config.hidden_dim + config.layer_input_dim(layer)
        for gate in GATES:
            shapes.append((f"layers.{layer}.W_{gate}", (width, config.hidden_dim)))
        for gate in GATES:
            shapes.append((f"layers.{layer}.b_{gate}", (config.hidden_dim,)))
    return shapes


def lstm_parameter_count(config: LstmConfig) -> int:
    """4 gates per layer, each a [(hidden + in) x hidden] matrix plus a bias."""
    H = config.hidden_dim
    total = 0
    for layer in range(config.n_layers):
        total += 4 * ((H + config.layer_input_dim(layer)) * H + H)
    return total


@dataclass
class LstmLayerWeights:
    params: Dict[str, Tensor]

    def __getitem__(self, name: str) -> Tensor:
        return self.params[name]

    @property
    def input_width(self) -> int:
        return self.params["W_f"].shape[0]


@dataclass
class LstmState:
    config: LstmConfig
    layers: List[LstmLayerWeights]

    def named_parameters(self) -> List[Tuple[str, Tensor]]:
        named = []
        for i, layer in enumerate(self.layers):
            named.extend((f"layers.{i}.W_{g}", layer[f"W_{g}"]) for g in GATES)
            named.extend((f"layers.{i}.b_{g}", layer[f"b_{g}"]) for g in GATES)
        return named

    @classmethod
    def from_arrays(cls, config: LstmConfig, arrays: Dict[str, np.ndarray]) -> "LstmState":
        layers = []
        for i in range(config.n_layers):
            params = {}
            for kind in ("W", "b"):
                for g in GATES:
                    name = f"{kind}_{g}"
                    params[name] = Tensor(arrays[f"layers.{i}.{name}"], requires_grad=True, name=f"lstm.layers.{i}.{name}")
            layers.append(LstmLayerWeights(params))
        return cls(config=config, layers=layers)


def init_lstm_state(config: LstmConfig, rng: np.random.Generator, dtype=np.float64) -> LstmState:
    """Weights uniform in +-1/sqrt(hidden); forget bias +1, other biases 0."""
    bound = 1.0 / math.sqrt(config.hidden_dim)
    arrays = {}
    for name, shape in lstm_parameter_shapes(config):
        if name.endswith("b_f"):
            arrays[name] = np.full(shape, FORGET_BIAS, dtype=dtype)
        elif ".b_" in name:
            arrays[name] = np.zeros(shape, dtype=dtype)
        else:
            arrays[name] = rng.uniform(-bound, bound, size=shape).astype(dtype)
    return LstmState.from_arrays(config, arrays)


def lstm_cell(x_t: Tensor, h_prev: Tensor, C_prev: Tensor, weights: LstmLayerWeights) -> Tuple[Tensor, Tensor]:
    """
    One LSTM step.

    Args:
        x_t: Input [B, in]
        h_prev: Previous hidden state [B, hidden]
        C_prev: Previous cell state [B, hidden]
        weights: Layer weights

    Returns:
        (h_t, C_t)

    Raises:
        DimensionError: If [h_prev, x_t] does not match the weight width
    """
    joined = F.concat_lastdim([h_prev, x_t])
    if joined.shape[-1] != weights.input_width:
        raise DimensionError(
            f"LSTM cell expects concatenated width {weights.input_width}, got {joined.shape[-1]}"
        )
    f = F.sigmoid(joined @ weights["W_f"] + weights["b_f"])
    i = F.sigmoid(joined @ weights["W_i"] + weights["b_i"])
    candidate = F.tanh(joined @ weights["W_c"] + weights["b_c"])
    o = F.sigmoid(joined @ weights["W_o"] + weights["b_o"])
    C_t = f * C_prev + i * candidate
    h_t = o * F.tanh(C_t)
    return h_t, C_t


def _zeros(batch: int, width: int, like: Tensor) -> Tensor:
    return Tensor(np.zeros((batch, width), dtype=like.dtype))


def run_stacked(
    H: Tensor,
    mask: Optional[np.ndarray],
    state: LstmState,
    training: bool,
    rng: Optional[np.random.Generator],
) -> Tensor:
    """
    Run every layer over the sequence and read out the top hidden state.

    Layer l+1 consumes layer l's hidden sequence after dropout (training only,
    never after the top layer). With readout `last_step` the state after the
    full padded length L is returned; `last_unmasked` takes each example's
    state at its last mask-1 position.

    Args:
        H: Encoder output [B, L, d_in] (or [L, d_in])
        mask: Attention mask [B, L]; only used by the `last_unmasked` readout
        state: LSTM weights
        training: Inter-layer dropout active when True
        rng: Dropout generator

    Returns:
        h_final [B, hidden] ([hidden] for a single sequence)

    Raises:
        DimensionError: If the sequence is empty
    """
    config = state.config
    single = H.ndim == 2
    if single:
        H = F.reshape(H, (1,) + H.shape)
    B, L, _ = H.shape
    if L == 0:
        raise DimensionError("LSTM input sequence is empty")

    sequence = [F.getitem(H, (slice(None), t, slice(None))) for t in range(L)]
    outputs: List[Tensor] = []
    for depth, layer in enumerate(state.layers):
        if depth > 0:
            sequence = [F.dropout(h, config.interlayer_dropout_p, training, rng) for h in outputs]
        h = _zeros(B, config.hidden_dim, H)
        C = _zeros(B, config.hidden_dim, H)
        outputs = []
        for x_t in sequence:
            h, C = lstm_cell(x_t, h, C, layer)
            outputs.append(h)

    if config.readout == "last_step":
        final = outputs[-1]
    else:
        if mask is None:
            raise DimensionError("last_unmasked readout needs the attention mask")
        mask = np.asarray(mask)
        if mask.ndim == 1:
            mask = mask[None, :]
        last = np.maximum(mask.sum(axis=1).astype(np.int64) - 1, 0)
        final = F.getitem(F.stack(outputs, axis=1), (np.arange(B), last))

    return F.reshape(final, final.shape[1:]) if single else final
