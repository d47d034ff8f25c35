"""
Subword tokenization and fixed-length encoding.

`SubwordTokenizer` performs greedy longest-match segmentation per word (the
WordPiece procedure): continuation pieces carry the `##` marker and a word that
cannot be fully segmented becomes a single [UNK]. `encode` pads or truncates to
the model's max_len and builds the attention mask.
"""

import logging
from dataclasses import dataclass
from typing import List, Optional, Protocol, Sequence

import numpy as np

from src.exceptions import ConfigError
from src.text.cleaning import CleaningConfig, clean
from src.text.vocabulary import CLS_TOKEN, PAD_TOKEN, SEP_TOKEN, UNK_TOKEN, Vocabulary

logger = logging.getLogger(__name__)


class Tokenizer(Protocol):
    """Anything that turns cleaned text into [CLS] ... [SEP] token strings."""

    vocab: Vocabulary

    def tokenize(self, text: str) -> List[str]:
        ...


@dataclass(frozen=True, eq=False)
class TokenizedSequence:
    """
    Fixed-length id vector with its attention mask.

    mask[j] == 1 exactly where ids[j] is not the [PAD] id; the mask is a run of
    ones followed by zeros.
    """

    ids: np.ndarray
    mask: np.ndarray
    original_token_count: int

    def __len__(self) -> int:
        return int(self.ids.shape[0])


class SubwordTokenizer:
    """Greedy longest-match subword tokenizer over a Vocabulary."""

    def __init__(self, vocab: Vocabulary, max_input_chars_per_word: int = 100):
        self.vocab = vocab
        self.max_input_chars_per_word = max_input_chars_per_word

    def tokenize_word(self, word: str) -> List[str]:
        if len(word) > self.max_input_chars_per_word:
            return [UNK_TOKEN]
        if word in self.vocab:
            return [word]
        prefix = self.vocab.continuation_prefix
        pieces = []
        start = 0
        while start < len(word):
            end = len(word)
            piece = None
            while start < end:
                candidate = word[start:end]
                if start > 0:
                    candidate = prefix + candidate
                if candidate in self.vocab:
                    piece = candidate
                    break
                end -= 1
            if piece is None:
                return [UNK_TOKEN]
            pieces.append(piece)
            start = end
        return pieces

    def tokenize(self, text: str) -> List[str]:
        """Return [CLS] + subword pieces of every word + [SEP]."""
        tokens = [CLS_TOKEN]
        for word in text.split():
            tokens.extend(self.tokenize_word(word))
        tokens.append(SEP_TOKEN)
        return tokens


def tokenize(text: str, vocab: Vocabulary) -> List[str]:
    return SubwordTokenizer(vocab).tokenize(text)


def encode(tokens: Sequence[str], vocab: Vocabulary, max_len: int) -> TokenizedSequence:
    """
    Pad or truncate a token list to exactly `max_len` ids.

    Longer inputs keep their first max_len - 1 tokens and end with [SEP];
    shorter ones are padded with [PAD].

    Raises:
        ConfigError: If max_len < 2
    """
    if max_len < 2:
        raise ConfigError(f"max_len must be at least 2, got {max_len}")
    count = len(tokens)
    tokens = list(tokens)
    if count > max_len:
        tokens = tokens[: max_len - 1] + [SEP_TOKEN]
    ids = vocab.ids_for(tokens)
    ids.extend([vocab.pad_id] * (max_len - len(ids)))
    ids_arr = np.asarray(ids, dtype=np.int64)
    mask = (ids_arr != vocab.pad_id).astype(np.int8)
    return TokenizedSequence(ids=ids_arr, mask=mask, original_token_count=count)


def decode(ids: Sequence[int], vocab: Vocabulary) -> List[str]:
    """Map ids back to token strings, dropping [PAD]."""
    return [t for t in vocab.tokens_for(ids) if t != PAD_TOKEN]


def detokenize(tokens: Sequence[str], continuation_prefix: str = "##") -> str:
    """Re-join subword pieces into words; special tokens other than [UNK] are dropped."""
    words: List[str] = []
    for token in tokens:
        if token in (CLS_TOKEN, SEP_TOKEN, PAD_TOKEN):
            continue
        if token.startswith(continuation_prefix) and words:
            words[-1] += token[len(continuation_prefix):]
        else:
            words.append(token)
    return " ".join(words)


def encode_text(
    text: str,
    tokenizer: Tokenizer,
    max_len: int,
    cleaning: Optional[CleaningConfig] = None,
) -> TokenizedSequence:
    """Clean (when a config is given), tokenize and encode one raw text."""
    if cleaning is not None:
        text = clean(text, cleaning)
    return encode(tokenizer.tokenize(text), tokenizer.vocab, max_len)


def encode_batch(
    texts: Sequence[str],
    tokenizer: Tokenizer,
    max_len: int,
    cleaning: Optional[CleaningConfig] = None,
) -> List[TokenizedSequence]:
    sequences = [encode_text(t, tokenizer, max_len, cleaning) for t in texts]
    truncated = sum(1 for s in sequences if s.original_token_count > max_len)
    if truncated:
        logger.debug(f"{truncated}/{len(sequences)} sequences truncated to {max_len} tokens")
    return sequences
