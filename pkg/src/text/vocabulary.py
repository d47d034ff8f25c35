"""
Token vocabulary.

Stored on disk as plain text, one token per line, line number = id. A
BERT-style WordPiece vocab.txt (with [PAD] on the first line) loads as is.
"""

import logging
from collections import Counter
from pathlib import Path
from typing import Dict, Iterable, List, Sequence

from src.exceptions import ConfigError, VocabularyError

logger = logging.getLogger(__name__)

PAD_TOKEN = "[PAD]"
UNK_TOKEN = "[UNK]"
CLS_TOKEN = "[CLS]"
SEP_TOKEN = "[SEP]"
SPECIAL_TOKENS = (PAD_TOKEN, UNK_TOKEN, CLS_TOKEN, SEP_TOKEN)
CONTINUATION_PREFIX = "##"


class Vocabulary:
    """Dense token <-> id mapping with the four special tokens."""

    def __init__(self, tokens: Sequence[str], continuation_prefix: str = CONTINUATION_PREFIX):
        """
        Args:
            tokens: Tokens in id order
            continuation_prefix: Marker carried by word-internal subword pieces

        Raises:
            VocabularyError: On duplicates, a missing special token, or [PAD] not at id 0
        """
        self.id_to_token: List[str] = list(tokens)
        self.token_to_id: Dict[str, int] = {}
        for idx, token in enumerate(self.id_to_token):
            if token in self.token_to_id:
                raise VocabularyError(f"duplicate token {token!r} at ids {self.token_to_id[token]} and {idx}")
            self.token_to_id[token] = idx
        missing = [t for t in SPECIAL_TOKENS if t not in self.token_to_id]
        if missing:
            raise VocabularyError(f"vocabulary lacks special tokens: {', '.join(missing)}")
        if self.token_to_id[PAD_TOKEN] != 0:
            raise VocabularyError(f"{PAD_TOKEN} must have id 0, found {self.token_to_id[PAD_TOKEN]}")
        self.continuation_prefix = continuation_prefix

    @property
    def pad_id(self) -> int:
        return self.token_to_id[PAD_TOKEN]

    @property
    def unk_id(self) -> int:
        return self.token_to_id[UNK_TOKEN]

    @property
    def cls_id(self) -> int:
        return self.token_to_id[CLS_TOKEN]

    @property
    def sep_id(self) -> int:
        return self.token_to_id[SEP_TOKEN]

    def __len__(self) -> int:
        return len(self.id_to_token)

    def __contains__(self, token: str) -> bool:
        return token in self.token_to_id

    def __eq__(self, other) -> bool:
        return isinstance(other, Vocabulary) and self.id_to_token == other.id_to_token

    def ids_for(self, tokens: Iterable[str]) -> List[int]:
        """Map tokens to ids; unknown tokens map to [UNK]."""
        unk = self.unk_id
        return [self.token_to_id.get(t, unk) for t in tokens]

    def tokens_for(self, ids: Iterable[int]) -> List[str]:
        return [self.id_to_token[int(i)] for i in ids]

    def save(self, path: Path) -> None:
        """Write one token per line (UTF-8, trailing newline)."""
        path = Path(path)
        path.parent.mkdir(parents=True, exist_ok=True)
        with open(path, "w", encoding="utf-8", newline="\n") as f:
            f.write("\n".join(self.id_to_token) + "\n")

    @classmethod
    def load(cls, path: Path) -> "Vocabulary":
        """
        Read a vocabulary file.

        Raises:
            VocabularyError: If the file is missing or inconsistent
        """
        path = Path(path)
        if not path.exists():
            raise VocabularyError(f"vocabulary file not found: {path}")
        with open(path, encoding="utf-8") as f:
            tokens = [line.rstrip("\n") for line in f]
        if tokens and tokens[-1] == "":
            tokens.pop()
        return cls(tokens)


def build_vocab(corpus: Sequence[str], max_size: int, min_freq: int = 1) -> Vocabulary:
    """
    Build a frequency-ranked whole-word vocabulary with a character fallback.

    Allocation order: the four specials, word-initial characters, continuation
    characters (`##c`), then whole words with count >= min_freq. Within each
    group tokens are ranked by descending count, ties broken lexicographically,
    so identical corpora give identical vocabularies.

    Args:
        corpus: Cleaned texts
        max_size: Upper bound on the vocabulary size (specials included)
        min_freq: Minimum count for a whole word to get its own entry

    Returns:
        Vocabulary

    Raises:
        ConfigError: If max_size leaves no room beyond the specials
        VocabularyError: If the corpus is empty
    """
    if max_size <= len(SPECIAL_TOKENS):
        raise ConfigError(f"max_size must exceed the {len(SPECIAL_TOKENS)} special tokens, got {max_size}")
    if not corpus:
        raise VocabularyError("cannot build a vocabulary from an empty corpus")

    words: Counter = Counter()
    for text in corpus:
        words.update(text.split())

    initial: Counter = Counter()
    continuation: Counter = Counter()
    for word, count in words.items():
        initial[word[0]] += count
        for ch in word[1:]:
            continuation[CONTINUATION_PREFIX + ch] += count

    def ranked(counter: Counter) -> List[str]:
        return [t for t, _ in sorted(counter.items(), key=lambda item: (-item[1], item[0]))]

    ordered = ranked(initial) + ranked(continuation) + [w for w in ranked(words) if words[w] >= min_freq]
    candidates = [t for t in dict.fromkeys(ordered) if t not in SPECIAL_TOKENS]
    room = max_size - len(SPECIAL_TOKENS)
    tokens = list(SPECIAL_TOKENS) + candidates[:room]

    dropped = len(candidates) - room
    if dropped > 0:
        logger.info(f"vocabulary capped at {max_size}; {dropped} candidate tokens left out")
    return Vocabulary(tokens)
