"""
LIME-style local explanations, one per label.

A comment's cleaned words are the interpretable features (repeated words share
one feature). Perturbed comments switch features off, the model scores every
perturbation once, and for each requested label a weighted linear surrogate
over the on/off masks is fit; its coefficients are the word importances.
"""

import itertools
import logging
import math
from dataclasses import dataclass, field
from typing import List, Optional, Sequence, Tuple

import numpy as np
from sklearn.linear_model import Ridge

from src.exceptions import ConfigError, ExplanationError
from src.models.hybrid import HybridModel
from src.rng import RngStreams
from src.text.cleaning import CleaningConfig, clean
from src.text.tokenizer import SubwordTokenizer, encode_batch
from src.text.vocabulary import Vocabulary

logger = logging.getLogger(__name__)

DEFAULT_SAMPLES = 200
DEFAULT_RIDGE = 1e-6
EXHAUSTIVE_LIMIT = 256
MIN_SAMPLES = 10


@dataclass
class Explanation:
    """Word importances for one label, strongest first."""

    label: str
    base_probability: float
    weighted_tokens: List[Tuple[str, float]]
    n_perturbations: int
    score: float
    intercept: float = 0.0
    flags: List[str] = field(default_factory=list)

    def weight_of(self, token: str) -> float:
        for t, w in self.weighted_tokens:
            if t == token:
                return w
        raise KeyError(token)

    def top_positive(self) -> Optional[str]:
        positives = [(t, w) for t, w in self.weighted_tokens if w > 0]
        if not positives:
            return None
        return max(positives, key=lambda item: item[1])[0]


@dataclass
class SurrogateFit:
    coefficients: np.ndarray
    intercept: float
    score: float
    flags: List[str] = field(default_factory=list)


def features_of(tokens: Sequence[str]) -> List[str]:
    """Distinct words in first-seen order."""
    return list(dict.fromkeys(tokens))


def render(tokens: Sequence[str], features: Sequence[str], mask: np.ndarray) -> str:
    """Text keeping only the words whose feature is switched on."""
    kept = {f for f, on in zip(features, mask) if on}
    return " ".join(t for t in tokens if t in kept)


def perturb_samples(
    tokens: Sequence[str],
    n: int,
    rng: np.random.Generator,
    exhaustive_limit: int = EXHAUSTIVE_LIMIT,
) -> List[Tuple[np.ndarray, str]]:
    """
    Masks over the distinct words of `tokens` with their rendered texts.

    Sample 0 is always the all-ones mask (the original text). When every mask
    fits within `exhaustive_limit` all 2^m masks are returned instead of `n`
    random ones; otherwise each word is dropped independently with
    probability 0.5.

    Raises:
        ExplanationError: If there are no tokens
        ConfigError: If n < 10
    """
    if not tokens:
        raise ExplanationError("nothing to perturb: the comment has no words")
    if n < MIN_SAMPLES:
        raise ConfigError(f"need at least {MIN_SAMPLES} perturbations, got {n}")
    features = features_of(tokens)
    m = len(features)

    if 2 ** m <= exhaustive_limit:
        masks = [np.ones(m, dtype=np.int8)]
        for bits in itertools.product((1, 0), repeat=m):
            if all(bits):
                continue
            masks.append(np.asarray(bits, dtype=np.int8))
    else:
        draws = (rng.random((n - 1, m)) >= 0.5).astype(np.int8)
        masks = [np.ones(m, dtype=np.int8)] + list(draws)
    return [(mask, render(tokens, features, mask)) for mask in masks]


def kernel_weights(masks: np.ndarray, kernel_width: float) -> np.ndarray:
    """exp(-d^2 / width^2) with d the Hamming distance to the all-ones mask."""
    distances = (masks == 0).sum(axis=1).astype(np.float64)
    return np.exp(-(distances ** 2) / (kernel_width ** 2))


def fit_surrogate(
    masks: np.ndarray,
    probabilities: np.ndarray,
    kernel_width: Optional[float] = None,
    ridge: float = DEFAULT_RIDGE,
) -> SurrogateFit:
    """
    Weighted ridge regression of one label's probability on the mask bits.

    Sample weights are normalized to sum to 1, so duplicating the whole sample
    set leaves the fit unchanged. A rank-deficient design is still solvable
    through the ridge term and is flagged.

    Args:
        masks: [S, m] binary masks
        probabilities: [S] model probabilities for the label
        kernel_width: Defaults to 0.75 * sqrt(m)
        ridge: L2 penalty

    Raises:
        ExplanationError: With fewer than two distinct masks
    """
    masks = np.asarray(masks, dtype=np.float64)
    probabilities = np.asarray(probabilities, dtype=np.float64)
    if masks.ndim != 2 or masks.shape[0] != probabilities.shape[0]:
        raise ExplanationError(f"masks {masks.shape} and probabilities {probabilities.shape} do not align")
    if len(np.unique(masks, axis=0)) < 2:
        raise ExplanationError("surrogate needs at least two distinct masks")
    m = masks.shape[1]
    width = kernel_width if kernel_width is not None else 0.75 * math.sqrt(m)
    if width <= 0:
        raise ConfigError(f"kernel width must be positive, got {width}")

    weights = kernel_weights(masks, width)
    weights = weights / weights.sum()

    flags = []
    design = np.hstack([np.ones((masks.shape[0], 1)), masks])
    if np.linalg.matrix_rank(design) < design.shape[1]:
        flags.append("design matrix is rank deficient; coefficients rely on the ridge term")

    surrogate = Ridge(alpha=ridge, solver="cholesky")
    surrogate.fit(masks, probabilities, sample_weight=weights)
    score = float(surrogate.score(masks, probabilities, sample_weight=weights))
    if not np.isfinite(score):
        score = 1.0 if np.allclose(surrogate.predict(masks), probabilities) else 0.0
    return SurrogateFit(
        coefficients=np.asarray(surrogate.coef_, dtype=np.float64),
        intercept=float(surrogate.intercept_),
        score=score,
        flags=flags,
    )


def explain_comment(
    text: str,
    model: HybridModel,
    vocab: Vocabulary,
    labels: Sequence[str],
    n: int = DEFAULT_SAMPLES,
    seed: int = 0,
    cleaning: Optional[CleaningConfig] = None,
    kernel_width: Optional[float] = None,
    ridge: float = DEFAULT_RIDGE,
    exhaustive_limit: int = EXHAUSTIVE_LIMIT,
) -> List[Explanation]:
    """
    Explain a trained model's probabilities for each requested label.

    All labels share one perturbation set scored in a single pass, so a label's
    weights do not depend on which other labels were requested.

    Args:
        text: Raw comment
        model: Trained model (used in eval mode)
        vocab: Vocabulary the model was trained with
        labels: Label names to explain
        n: Perturbation count when sampling
        seed: Seed for the `lime` stream
        cleaning: Cleaning settings applied to `text` first

    Returns:
        One Explanation per requested label, in request order

    Raises:
        ExplanationError: If nothing is left of the comment after cleaning
        ConfigError: On an unknown label
    """
    unknown = [label for label in labels if label not in model.config.labels]
    if unknown:
        raise ConfigError(f"unknown labels: {', '.join(unknown)}")
    if not labels:
        return []

    cleaned = clean(text, cleaning) if cleaning is not None else " ".join(text.split())
    words = cleaned.split()
    if not words:
        raise ExplanationError(
            "the comment is empty after cleaning; pass text with at least one word in the allowed scripts"
        )

    rng = RngStreams(seed).fresh("lime")
    samples = perturb_samples(words, n, rng, exhaustive_limit)
    masks = np.stack([mask for mask, _ in samples])
    tokenizer = SubwordTokenizer(vocab)
    sequences = encode_batch([t for _, t in samples], tokenizer, model.config.encoder.max_len)
    probabilities = model.predict_proba(sequences)
    features = features_of(words)
    logger.debug(f"explaining {len(features)} words with {len(samples)} perturbations")

    explanations = []
    for label in labels:
        k = model.config.labels.index(label)
        fit = fit_surrogate(masks, probabilities[:, k], kernel_width, ridge)
        weighted = sorted(
            zip(features, fit.coefficients.tolist()),
            key=lambda item: (-abs(item[1]), item[0]),
        )
        explanations.append(Explanation(
            label=label,
            base_probability=float(probabilities[0, k]),
            weighted_tokens=weighted,
            n_perturbations=len(samples),
            score=fit.score,
            intercept=fit.intercept,
            flags=list(fit.flags),
        ))
    return explanations
