"""
Planted-token synthetic corpus.

Each label owns one trigger word; an example carries a label exactly when its
text contains that label's trigger. The remaining words come from a neutral
filler pool. The corpus is small enough for the desk preset to memorize, which
makes it the ground truth for overfit and explainer-faithfulness checks.
"""

import logging
from typing import Dict, List, Optional, Sequence

import numpy as np

from src import LABELS
from src.data.dataset import LabeledExample
from src.exceptions import ConfigError

logger = logging.getLogger(__name__)

PLANTED_TOKENS: Dict[str, str] = {
    "bully": "idiot",
    "sexual": "nude",
    "religious": "infidel",
    "threat": "kill",
    "spam": "lottery",
}

FILLER_WORDS = (
    "good", "day", "movie", "song", "watch", "friend", "nice", "video",
    "match", "team", "food", "rain", "city", "photo", "river", "school",
    "music", "game", "story", "market", "train", "garden", "coffee", "news",
    "sunday", "village", "cricket", "festival", "book", "mother", "brother", "tea",
)


def generate_planted_corpus(
    n: int,
    rng: np.random.Generator,
    positive_rate: float = 0.3,
    filler_range: Sequence[int] = (3, 6),
    planted: Optional[Dict[str, str]] = None,
    id_prefix: str = "synthetic",
) -> List[LabeledExample]:
    """
    Generate `n` distinct examples with planted trigger words.

    The first five examples are single-label (one per label, in label order)
    so every label has a positive whenever n >= 5. Texts are unique; a
    collision is resolved by drawing again.

    Args:
        n: Number of examples
        rng: Generator (any stream; the CLI uses `split`)
        positive_rate: Independent probability of each label being set
        filler_range: Inclusive (min, max) number of filler words per example
        planted: Label -> trigger word map (defaults to PLANTED_TOKENS)
        id_prefix: Prefix of the generated example ids

    Returns:
        List of LabeledExample

    Raises:
        ConfigError: If `n` distinct texts cannot be drawn with these settings
    """
    planted = dict(planted or PLANTED_TOKENS)
    low, high = int(filler_range[0]), int(filler_range[1])
    examples: List[LabeledExample] = []
    seen = set()
    attempts = 0
    while len(examples) < n:
        attempts += 1
        if attempts > 100 * max(n, 1):
            raise ConfigError(f"could not generate {n} distinct texts; widen filler_range")
        index = len(examples)
        if index < len(LABELS):
            labels = tuple(int(i == index) for i in range(len(LABELS)))
        else:
            labels = tuple(int(v) for v in (rng.random(len(LABELS)) < positive_rate))

        n_filler = int(rng.integers(low, high + 1))
        words = list(rng.choice(FILLER_WORDS, size=n_filler, replace=False))
        words += [planted[name] for name, flag in zip(LABELS, labels) if flag]
        words = [words[i] for i in rng.permutation(len(words))]
        text = " ".join(words)
        if text in seen:
            continue
        seen.add(text)
        examples.append(LabeledExample(text=text, labels=labels, example_id=f"{id_prefix}:{index}"))

    logger.debug(f"generated {n} planted examples after {attempts} draws")
    return examples


def planted_comment(label: str, rng: np.random.Generator, n_filler: int = 4,
                    planted: Optional[Dict[str, str]] = None) -> str:
    """One single-label comment: `n_filler` filler words with the label's trigger at a random position."""
    planted = dict(planted or PLANTED_TOKENS)
    if label not in planted:
        raise KeyError(f"no trigger word for label {label!r}")
    words = list(rng.choice(FILLER_WORDS, size=n_filler, replace=False))
    words.insert(int(rng.integers(0, n_filler + 1)), planted[label])
    return " ".join(words)
