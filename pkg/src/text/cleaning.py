"""
Comment cleaning.

The cleaning pipeline composes four stages:
    normalize (case, whitespace, repeated characters, abbreviations)
    -> strip (URLs, digits, symbols, characters outside the allowed scripts)
    -> remove stopwords (then the optional stemmer hook)
    -> refine (trim and collapse spaces)

Word lists come from plain UTF-8 files so real linguistic resources can be
dropped in without code changes.
"""

import logging
import re
import unicodedata
from dataclasses import dataclass, field
from pathlib import Path
from types import MappingProxyType
from typing import Callable, Dict, FrozenSet, Mapping, Optional, Sequence, Tuple

from src.exceptions import ConfigError

logger = logging.getLogger(__name__)

# lowercase Latin and the Bengali block
DEFAULT_SCRIPT_RANGES: Tuple[Tuple[int, int], ...] = ((0x61, 0x7A), (0x0980, 0x09FF))

URL_PATTERN = re.compile(r"(?:https?://|www\.)\S+", re.IGNORECASE)
EMAIL_PATTERN = re.compile(r"\S+@\S+\.\S+")
WHITESPACE_PATTERN = re.compile(r"\s+")

MAX_ROUNDS = 6


@dataclass(frozen=True)
class CleaningConfig:
    """Immutable settings for `clean`."""

    allowed_script_ranges: Tuple[Tuple[int, int], ...] = DEFAULT_SCRIPT_RANGES
    stopwords: FrozenSet[str] = frozenset()
    abbreviation_map: Mapping[str, str] = field(default_factory=lambda: MappingProxyType({}))
    max_char_repeat: int = 2
    stemmer: Optional[Callable[[str], str]] = None

    def __post_init__(self):
        ranges = tuple((int(lo), int(hi)) for lo, hi in self.allowed_script_ranges)
        for lo, hi in ranges:
            if lo > hi:
                raise ConfigError(f"script range ({lo:#x}, {hi:#x}) is reversed")
        for (lo1, hi1), (lo2, hi2) in zip(ranges, ranges[1:]):
            if lo2 <= hi1:
                raise ConfigError("script ranges must be sorted and non-overlapping")
        if self.max_char_repeat < 1:
            raise ConfigError(f"max_char_repeat must be positive, got {self.max_char_repeat}")
        expansions = {w for value in self.abbreviation_map.values() for w in value.split()}
        chained = expansions & set(self.abbreviation_map)
        if chained:
            raise ConfigError(f"abbreviation expansions must not themselves be abbreviations: {sorted(chained)}")
        object.__setattr__(self, "allowed_script_ranges", ranges)
        object.__setattr__(self, "stopwords", frozenset(self.stopwords))
        object.__setattr__(self, "abbreviation_map", MappingProxyType(dict(self.abbreviation_map)))

    def allows(self, char: str) -> bool:
        code = ord(char)
        return any(lo <= code <= hi for lo, hi in self.allowed_script_ranges)


def _normalize(text: str, cfg: CleaningConfig) -> str:
    text = unicodedata.normalize("NFC", text).lower()
    text = WHITESPACE_PATTERN.sub(" ", text)
    n = cfg.max_char_repeat
    text = re.sub(r"(.)\1{%d,}" % n, lambda m: m.group(1) * n, text)
    if cfg.abbreviation_map:
        text = " ".join(cfg.abbreviation_map.get(w, w) for w in text.split(" "))
    return text


def _strip(text: str, cfg: CleaningConfig) -> str:
    text = URL_PATTERN.sub(" ", text)
    text = EMAIL_PATTERN.sub(" ", text)
    kept = []
    for ch in text:
        category = unicodedata.category(ch)
        if category[0] in ("L", "M") and cfg.allows(ch):
            kept.append(ch)
        else:
            kept.append(" ")
    return "".join(kept)


def _remove_stopwords(words: Sequence[str], cfg: CleaningConfig):
    words = [w for w in words if w and w not in cfg.stopwords]
    if cfg.stemmer is not None:
        words = [cfg.stemmer(w) for w in words]
    return words


def _clean_once(text: str, cfg: CleaningConfig) -> str:
    text = _strip(_normalize(text, cfg), cfg)
    return " ".join(_remove_stopwords(text.split(), cfg)).strip()


def clean(text: str, cfg: CleaningConfig) -> str:
    """
    Clean one comment.

    Stages are repeated until the text stops changing, so a stage that exposes
    new work for an earlier one (e.g. digit removal splitting off an
    abbreviation) is settled within the call and `clean` is idempotent.

    Args:
        text: Raw comment
        cfg: Cleaning settings

    Returns:
        Cleaned text; may be empty
    """
    current = _clean_once(text, cfg)
    for _ in range(MAX_ROUNDS):
        following = _clean_once(current, cfg)
        if following == current:
            return current
        current = following
    logger.warning(f"cleaning did not settle after {MAX_ROUNDS} rounds for: {text[:40]!r}")
    return current


def read_word_list(path: Path) -> FrozenSet[str]:
    """Read one word per line; blank lines and `#` comments are skipped."""
    words = set()
    with open(path, encoding="utf-8") as f:
        for line in f:
            line = line.strip()
            if line and not line.startswith("#"):
                words.add(unicodedata.normalize("NFC", line).lower())
    return frozenset(words)


def read_abbreviation_map(path: Path) -> Dict[str, str]:
    """Read `word<TAB>expansion` pairs (any whitespace separates the first word)."""
    mapping = {}
    with open(path, encoding="utf-8") as f:
        for number, line in enumerate(f, 1):
            line = line.strip()
            if not line or line.startswith("#"):
                continue
            parts = line.split(None, 1)
            if len(parts) != 2:
                raise ConfigError(f"{path}:{number}: expected 'word<TAB>expansion'")
            mapping[parts[0].lower()] = parts[1].strip().lower()
    return mapping


def load_cleaning_config(section: Optional[Dict] = None, base_dir: Optional[Path] = None) -> CleaningConfig:
    """
    Build a CleaningConfig from the `cleaning` config section.

    Args:
        section: Section dictionary (paths may be relative to `base_dir`)
        base_dir: Directory used to resolve relative resource paths

    Returns:
        CleaningConfig with word lists loaded
    """
    section = section or {}
    base_dir = Path(base_dir) if base_dir else Path.cwd()

    def _resolve(key: str) -> Optional[Path]:
        value = section.get(key)
        if not value:
            return None
        path = Path(value)
        return path if path.is_absolute() else base_dir / path

    stop_path = _resolve("stopwords_path")
    abbrev_path = _resolve("abbreviations_path")
    stopwords = read_word_list(stop_path) if stop_path and stop_path.exists() else frozenset()
    abbreviations = read_abbreviation_map(abbrev_path) if abbrev_path and abbrev_path.exists() else {}
    for label, path in (("stopword", stop_path), ("abbreviation", abbrev_path)):
        if path and not path.exists():
            logger.warning(f"{label} file not found, continuing without it: {path}")

    ranges = section.get("allowed_script_ranges") or DEFAULT_SCRIPT_RANGES
    return CleaningConfig(
        allowed_script_ranges=tuple(tuple(r) for r in ranges),
        stopwords=stopwords,
        abbreviation_map=abbreviations,
        max_char_repeat=int(section.get("max_char_repeat", 2)),
    )
