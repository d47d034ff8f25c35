"""
Binary checkpoint format.

    magic      4 bytes  b"CGCK"
    version    uint16   (little-endian, as are all integers below)
    config     uint32 byte length + UTF-8 `key=value` lines (ModelConfig.to_flat)
    count      uint32 number of parameter records
    record     uint16 name length + UTF-8 name
               2 bytes dtype tag (b"f8" or b"f4")
               uint8 ndim + ndim * uint32 dims
               raw little-endian values

The whole file is parsed and checked against the config's expected parameter
shapes before any model is built, so a bad file never yields a partial model.
Writes go to a temporary file that is renamed into place.
"""

import logging
import os
import struct
import tempfile
from pathlib import Path
from typing import Dict, Optional, Tuple

import numpy as np

from src.exceptions import (
    CheckpointShapeError,
    CheckpointTruncatedError,
    CheckpointVersionError,
    ConfigError,
)
from src.models.hybrid import HybridModel, ModelConfig, parameter_shapes
from src.text.vocabulary import Vocabulary

logger = logging.getLogger(__name__)

MAGIC = b"CGCK"
FORMAT_VERSION = 1
DTYPE_TAGS = {np.dtype(np.float64): b"f8", np.dtype(np.float32): b"f4"}
TAG_DTYPES = {b"f8": np.dtype("<f8"), b"f4": np.dtype("<f4")}
VOCAB_FILENAME = "vocab.txt"


def vocab_path_for(checkpoint_path: Path) -> Path:
    """The vocabulary travels next to its checkpoint."""
    return Path(checkpoint_path).parent / VOCAB_FILENAME


def _config_block(config: ModelConfig) -> bytes:
    lines = [f"{key}={value}" for key, value in config.to_flat().items()]
    return ("\n".join(lines) + "\n").encode("utf-8")


def _encode(model: HybridModel) -> bytes:
    parts = [MAGIC, struct.pack("<H", FORMAT_VERSION)]
    block = _config_block(model.config)
    parts += [struct.pack("<I", len(block)), block, struct.pack("<I", len(model.registry))]
    for name, tensor in model.registry.items():
        dtype = tensor.data.dtype
        if dtype not in DTYPE_TAGS:
            raise ConfigError(f"cannot store {name} with dtype {dtype}")
        encoded_name = name.encode("utf-8")
        parts.append(struct.pack("<H", len(encoded_name)))
        parts.append(encoded_name)
        parts.append(DTYPE_TAGS[dtype])
        parts.append(struct.pack("<B", tensor.ndim))
        parts.append(struct.pack(f"<{tensor.ndim}I", *tensor.shape))
        parts.append(np.ascontiguousarray(tensor.data, dtype=dtype.newbyteorder("<")).tobytes())
    return b"".join(parts)


def save_checkpoint(model: HybridModel, path: Path, vocab: Optional[Vocabulary] = None) -> Path:
    """
    Atomically write `model` (and optionally its vocabulary) to `path`.

    Returns:
        The checkpoint path
    """
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    payload = _encode(model)
    fd, tmp_name = tempfile.mkstemp(prefix=".ckpt-", dir=path.parent)
    try:
        with os.fdopen(fd, "wb") as f:
            f.write(payload)
        os.replace(tmp_name, path)
    except BaseException:
        if os.path.exists(tmp_name):
            os.unlink(tmp_name)
        raise
    if vocab is not None:
        vocab.save(vocab_path_for(path))
    logger.debug(f"saved checkpoint {path} ({len(payload):,} bytes)")
    return path


class _Reader:
    def __init__(self, data: bytes):
        self.data = data
        self.offset = 0

    def take(self, n: int, what: str) -> bytes:
        if self.offset + n > len(self.data):
            raise CheckpointTruncatedError(
                f"checkpoint ends while reading {what} (needed {n} bytes at offset {self.offset}, "
                f"file has {len(self.data)})"
            )
        chunk = self.data[self.offset:self.offset + n]
        self.offset += n
        return chunk

    def unpack(self, fmt: str, what: str) -> Tuple:
        return struct.unpack(fmt, self.take(struct.calcsize(fmt), what))


def _parse_config_block(text: str) -> Dict[str, str]:
    flat = {}
    for line in text.splitlines():
        if not line:
            continue
        key, sep, value = line.partition("=")
        if not sep:
            raise CheckpointVersionError(f"malformed config line {line!r}")
        flat[key] = value
    return flat


def load_checkpoint(path: Path) -> HybridModel:
    """
    Read a checkpoint written by `save_checkpoint`.

    Raises:
        FileNotFoundError: If the file does not exist
        CheckpointVersionError: Bad magic bytes, unknown version or unreadable header
        CheckpointShapeError: Parameter names or shapes disagree with the stored config
        CheckpointTruncatedError: The file ends before every record is read
    """
    path = Path(path)
    if not path.exists():
        raise FileNotFoundError(f"Checkpoint not found: {path}")
    reader = _Reader(path.read_bytes())

    magic = reader.take(len(MAGIC), "magic bytes")
    if magic != MAGIC:
        raise CheckpointVersionError(f"{path} is not a cyberguard checkpoint (magic {magic!r})")
    (version,) = reader.unpack("<H", "format version")
    if version != FORMAT_VERSION:
        raise CheckpointVersionError(f"unsupported checkpoint version {version} (expected {FORMAT_VERSION})")

    (block_len,) = reader.unpack("<I", "config length")
    try:
        flat = _parse_config_block(reader.take(block_len, "config block").decode("utf-8"))
        config = ModelConfig.from_flat(flat)
    except (UnicodeDecodeError, ConfigError) as e:
        raise CheckpointVersionError(f"unreadable config block: {e}") from e

    expected = parameter_shapes(config)
    (count,) = reader.unpack("<I", "record count")
    if count != len(expected):
        raise CheckpointShapeError(f"checkpoint holds {count} parameters, config expects {len(expected)}")

    arrays: Dict[str, np.ndarray] = {}
    for expected_name, expected_shape in expected:
        (name_len,) = reader.unpack("<H", "parameter name length")
        name = reader.take(name_len, "parameter name").decode("utf-8", errors="replace")
        if name != expected_name:
            raise CheckpointShapeError(f"expected parameter {expected_name}, found {name}")
        tag = reader.take(2, f"dtype of {name}")
        if tag not in TAG_DTYPES:
            raise CheckpointVersionError(f"unknown dtype tag {tag!r} for {name}")
        (ndim,) = reader.unpack("<B", f"rank of {name}")
        shape = reader.unpack(f"<{ndim}I", f"shape of {name}") if ndim else ()
        if tuple(shape) != tuple(expected_shape):
            raise CheckpointShapeError(f"{name}: stored shape {tuple(shape)} != expected {tuple(expected_shape)}")
        dtype = TAG_DTYPES[tag]
        n_bytes = int(np.prod(shape, dtype=np.int64)) * dtype.itemsize
        raw = reader.take(n_bytes, f"values of {name}")
        arrays[name] = np.frombuffer(raw, dtype=dtype).reshape(shape).astype(dtype.newbyteorder("="))

    if reader.offset != len(reader.data):
        logger.warning(f"{path}: {len(reader.data) - reader.offset} trailing bytes ignored")
    return HybridModel.from_arrays(config, arrays)


def load_checkpoint_with_vocab(path: Path) -> Tuple[HybridModel, Vocabulary]:
    """Load a checkpoint and the vocabulary saved beside it; the sizes must agree."""
    model = load_checkpoint(path)
    vocab = Vocabulary.load(vocab_path_for(path))
    if len(vocab) != model.config.encoder.vocab_size:
        raise CheckpointShapeError(
            f"vocabulary has {len(vocab)} tokens but the model was built for {model.config.encoder.vocab_size}"
        )
    return model, vocab
