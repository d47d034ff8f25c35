"""Text pipeline: cleaning, vocabulary and subword tokenization."""

from src.text.cleaning import CleaningConfig, clean, load_cleaning_config
from src.text.tokenizer import (
    SubwordTokenizer,
    TokenizedSequence,
    decode,
    detokenize,
    encode,
    encode_batch,
    encode_text,
    tokenize,
)
from src.text.vocabulary import Vocabulary, build_vocab

__all__ = [
    "CleaningConfig",
    "SubwordTokenizer",
    "TokenizedSequence",
    "Vocabulary",
    "build_vocab",
    "clean",
    "decode",
    "detokenize",
    "encode",
    "encode_batch",
    "encode_text",
    "load_cleaning_config",
    "tokenize",
]
