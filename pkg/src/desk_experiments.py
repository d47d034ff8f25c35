"""
Scaled-down acceptance experiments on the planted-token corpus.

The full-size model and dataset are out of reach on one CPU, so these runs
check the behaviour that does transfer: the desk preset can memorize a small
five-label corpus, the explainer recovers the planted trigger words, and
resampling meets its count targets without touching held-out data.
"""

import copy
import logging
from dataclasses import dataclass, field
from typing import Any, Dict, List, Optional

import joblib

from src import LABELS
from src.config import load_default_config
from src.data.dataset import split_dataset
from src.data.sampling import class_counts, oversample, undersample
from src.data.synthetic import PLANTED_TOKENS, generate_planted_corpus, planted_comment
from src.evaluation.metrics import multilabel_accuracy
from src.explain.lime_explainer import explain_comment
from src.models.hybrid import HybridModel, model_config_from_settings
from src.rng import RngStreams
from src.text.tokenizer import SubwordTokenizer, encode_text
from src.text.vocabulary import Vocabulary, build_vocab
from src.training.trainer import Trainer, TrainingResult, encode_examples

logger = logging.getLogger(__name__)

DESK_OVERRIDES: Dict[str, Dict[str, Any]] = {
    "encoder": {"preset": "desk", "max_len": 16, "dropout_p": 0.0},
    "lstm": {"interlayer_dropout_p": 0.0},
    "head": {"dropout_p": 0.0},
    # lr and the epoch cap are fixed; batches of 2 give 4800 updates over 32 examples
    "training": {"epochs": 300, "batch_size": 2, "eval_batch_size": 64, "dtype": "float64"},
    "optimizer": {"lr": 1e-3, "weight_decay": 0.0, "warmup_ratio": 0.05},
}


def desk_settings(**sections: Dict[str, Any]) -> Dict[str, Dict[str, Any]]:
    """Defaults with the overfit-run overrides, then any per-section overrides."""
    settings = copy.deepcopy(load_default_config())
    for source in (DESK_OVERRIDES, sections):
        for section, values in source.items():
            settings.setdefault(section, {}).update(values)
    return settings


@dataclass
class OverfitOutcome:
    model: HybridModel
    vocab: Vocabulary
    result: TrainingResult
    train_loss: float
    train_subset_accuracy: float
    heldout_accuracy: float


def run_overfit(
    seed: int = 0,
    n_train: int = 32,
    n_heldout: int = 8,
    epochs: Optional[int] = None,
    settings: Optional[Dict[str, Dict[str, Any]]] = None,
    show_progress: bool = False,
) -> OverfitOutcome:
    """
    Train the desk preset on a small planted corpus and score it.

    Returns:
        Eval-mode training BCE, training subset accuracy and held-out
        labelwise accuracy of the best snapshot
    """
    settings = settings or desk_settings()
    streams = RngStreams(seed)
    corpus = generate_planted_corpus(n_train + n_heldout, streams.stream("split"))
    train, heldout = corpus[:n_train], corpus[n_train:]

    vocab = build_vocab([e.text for e in train], int(settings["tokenizer"].get("max_vocab_size", 8000)))
    model = HybridModel.initialize(model_config_from_settings(settings, len(vocab)), streams.stream("init"))
    tokenizer = SubwordTokenizer(vocab)
    max_len = model.config.encoder.max_len
    train_enc = encode_examples(train, tokenizer, max_len)
    heldout_enc = encode_examples(heldout, tokenizer, max_len)

    trainer = Trainer(model, streams, settings["training"], settings["optimizer"], show_progress=show_progress)
    result = trainer.fit(train_enc, None, epochs)

    train_loss, train_probs = trainer.evaluate(train_enc)
    _, heldout_probs = trainer.evaluate(heldout_enc)
    threshold = model.config.threshold
    outcome = OverfitOutcome(
        model=model,
        vocab=vocab,
        result=result,
        train_loss=train_loss,
        train_subset_accuracy=multilabel_accuracy(train_enc.targets, (train_probs >= threshold).astype(int), "subset"),
        heldout_accuracy=multilabel_accuracy(heldout_enc.targets, (heldout_probs >= threshold).astype(int), "labelwise"),
    )
    logger.info(f"overfit run: loss {outcome.train_loss:.4f}, subset acc {outcome.train_subset_accuracy:.3f}")
    return outcome


@dataclass
class FaithfulnessOutcome:
    trials: int = 0
    top_rank_hits: int = 0
    deletion_drops: int = 0
    misses: List[str] = field(default_factory=list)

    @property
    def hit_rate(self) -> float:
        return self.top_rank_hits / self.trials if self.trials else 0.0

    @property
    def drop_rate(self) -> float:
        return self.deletion_drops / self.trials if self.trials else 0.0


def run_faithfulness(
    model: HybridModel,
    vocab: Vocabulary,
    seed: int = 0,
    trials: int = 50,
    n_samples: int = 200,
) -> FaithfulnessOutcome:
    """
    Explain fresh single-label planted comments and check the trigger word.

    A trial counts as a hit when the label's trigger has the largest positive
    weight, and as a drop when deleting the top-weighted word lowers the
    label's probability.
    """
    tokenizer = SubwordTokenizer(vocab)
    max_len = model.config.encoder.max_len
    outcome = FaithfulnessOutcome()
    for trial in range(trials):
        label = LABELS[trial % len(LABELS)]
        k = LABELS.index(label)
        text = planted_comment(label, RngStreams(seed).child(trial).stream("split"))
        explanation = explain_comment(text, model, vocab, [label], n=n_samples, seed=seed + trial)[0]

        top = explanation.top_positive()
        outcome.trials += 1
        if top == PLANTED_TOKENS[label]:
            outcome.top_rank_hits += 1
        else:
            outcome.misses.append(f"{label}: {text!r} ranked {top!r} first")

        removed = top or explanation.weighted_tokens[0][0]
        reduced = " ".join(w for w in text.split() if w != removed)
        after = model.predict_proba([encode_text(reduced, tokenizer, max_len)])[0, k]
        if after < explanation.base_probability:
            outcome.deletion_drops += 1
    return outcome


def check_resampling(seed: int = 0, n: int = 200) -> Dict[str, bool]:
    """
    Count guarantees of both resamplers on a planted corpus.

    Returns:
        Named pass/fail results
    """
    streams = RngStreams(seed)
    split = split_dataset(generate_planted_corpus(n, streams.stream("split")), rng=streams.stream("split"))
    held_before = joblib.hash((split.validation, split.test))

    single = [e for e in split.train if len(e.positive_labels) == 1]
    single_counts = class_counts(single)
    under_single = class_counts(undersample(single, streams.fresh("sampling")))
    over_single = class_counts(oversample(single, streams.fresh("sampling")))

    original = class_counts(split.train)
    under = class_counts(undersample(split.train, streams.fresh("sampling")))
    over = class_counts(oversample(split.train, streams.fresh("sampling")))

    return {
        "single-label undersample hits min": all(c == single_counts.minimum for c in under_single.counts),
        "single-label oversample hits max": all(c == single_counts.maximum for c in over_single.counts),
        "multilabel undersample never grows": all(u <= o for u, o in zip(under.counts, original.counts)),
        "multilabel oversample never shrinks": all(v >= o for v, o in zip(over.counts, original.counts)),
        "held-out splits unchanged": joblib.hash((split.validation, split.test)) == held_before,
    }


def summary_rows(overfit: OverfitOutcome, faithfulness: FaithfulnessOutcome,
                 resampling: Dict[str, bool]) -> List[List[str]]:
    """(criterion, value, target, pass) rows for the results table."""
    rows = [
        ["overfit: train BCE", f"{overfit.train_loss:.4f}", "< 0.05", overfit.train_loss < 0.05],
        ["overfit: train subset accuracy", f"{overfit.train_subset_accuracy:.3f}", ">= 0.99",
         overfit.train_subset_accuracy >= 0.99],
        ["overfit: held-out labelwise accuracy", f"{overfit.heldout_accuracy:.3f}", ">= 0.90",
         overfit.heldout_accuracy >= 0.90],
        ["explainer: trigger ranked first", f"{faithfulness.hit_rate:.2f}", ">= 0.90", faithfulness.hit_rate >= 0.90],
        ["explainer: deletion lowers probability", f"{faithfulness.drop_rate:.2f}", ">= 0.80",
         faithfulness.drop_rate >= 0.80],
    ]
    rows += [[name, str(ok), "True", ok] for name, ok in resampling.items()]
    return [[name, value, target, "✓" if ok else "✗"] for name, value, target, ok in rows]
