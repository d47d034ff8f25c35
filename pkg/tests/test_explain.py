"""Tests for the perturbation sampler, the surrogate fit and explain_comment."""

import itertools

import numpy as np
import pytest

from src.exceptions import ConfigError, ExplanationError
from src.explain import explain_comment, fit_surrogate, perturb_samples
from src.models import HybridModel
from src.text import CleaningConfig, SubwordTokenizer, encode_text
from tests.conftest import tiny_model_config


@pytest.fixture
def vocab_model(small_vocab):
    model = HybridModel.initialize(tiny_model_config(vocab_size=len(small_vocab), max_len=8), np.random.default_rng(4))
    return small_vocab, model


def all_masks(m):
    return np.array(list(itertools.product((1, 0), repeat=m)), dtype=float)


class TestPerturbation:
    def test_exhaustive_for_short_comments(self, rng):
        samples = perturb_samples(["you", "idiot", "now"], 200, rng)
        masks = np.stack([m for m, _ in samples])
        assert len(samples) == 8
        np.testing.assert_array_equal(masks[0], [1, 1, 1])
        assert samples[0][1] == "you idiot now"
        assert len({tuple(m) for m in masks}) == 8

    def test_sampled_for_long_comments(self, rng):
        words = [f"w{i}" for i in range(9)]
        samples = perturb_samples(words, 50, rng)
        assert len(samples) == 50
        np.testing.assert_array_equal(samples[0][0], np.ones(9))

    def test_repeated_words_share_a_feature(self, rng):
        samples = perturb_samples(["bad", "bad", "man"], 20, rng)
        assert len(samples) == 4
        rendered = {tuple(m): text for m, text in samples}
        assert rendered[(0, 1)] == "man"
        assert rendered[(1, 0)] == "bad bad"

    def test_invalid(self, rng):
        with pytest.raises(ExplanationError):
            perturb_samples([], 20, rng)
        with pytest.raises(ConfigError):
            perturb_samples(["a"], 5, rng)


class TestSurrogate:
    def test_recovers_linear_response(self):
        masks = all_masks(3)
        probabilities = 0.1 + 0.3 * masks[:, 0] - 0.2 * masks[:, 2]
        fit = fit_surrogate(masks, probabilities)
        np.testing.assert_allclose(fit.coefficients, [0.3, 0.0, -0.2], atol=1e-4)
        assert fit.intercept == pytest.approx(0.1, abs=1e-4)
        assert fit.score == pytest.approx(1.0, abs=1e-6)

    def test_duplicated_samples_leave_fit_unchanged(self, rng):
        masks = all_masks(4)
        probabilities = rng.random(len(masks))
        single = fit_surrogate(masks, probabilities)
        doubled = fit_surrogate(np.vstack([masks, masks]), np.concatenate([probabilities, probabilities]))
        np.testing.assert_allclose(single.coefficients, doubled.coefficients, atol=1e-10)

    def test_rank_deficiency_is_flagged(self):
        masks = np.array([[1, 1], [0, 0], [1, 1], [0, 0]], dtype=float)
        fit = fit_surrogate(masks, np.array([0.9, 0.1, 0.9, 0.1]))
        assert fit.flags

    def test_needs_two_distinct_masks(self):
        with pytest.raises(ExplanationError):
            fit_surrogate(np.ones((5, 2)), np.full(5, 0.5))


class TestExplainComment:
    def test_shapes_and_base_probability(self, vocab_model):
        vocab, model = vocab_model
        explanations = explain_comment("you idiot now", model, vocab, ["bully", "spam"], seed=3)
        assert [e.label for e in explanations] == ["bully", "spam"]
        bully = explanations[0]
        assert bully.n_perturbations == 8
        assert {t for t, _ in bully.weighted_tokens} == {"you", "idiot", "now"}
        weights = [abs(w) for _, w in bully.weighted_tokens]
        assert weights == sorted(weights, reverse=True)
        direct = model.predict_proba([encode_text("you idiot now", SubwordTokenizer(vocab), 8)])[0, 0]
        assert bully.base_probability == pytest.approx(direct, abs=1e-12)

    def test_labels_do_not_influence_each_other(self, vocab_model):
        vocab, model = vocab_model
        text = "send nude photos you idiot win lottery now nice song"
        both = explain_comment(text, model, vocab, ["bully", "spam"], n=60, seed=9)
        alone = explain_comment(text, model, vocab, ["spam"], n=60, seed=9)
        assert both[1].weighted_tokens == alone[0].weighted_tokens

    def test_seeded(self, vocab_model):
        vocab, model = vocab_model
        text = "send nude photos you idiot win lottery now nice song"
        a = explain_comment(text, model, vocab, ["threat"], n=40, seed=1)
        b = explain_comment(text, model, vocab, ["threat"], n=40, seed=1)
        assert a[0].weighted_tokens == b[0].weighted_tokens

    def test_errors(self, vocab_model):
        vocab, model = vocab_model
        with pytest.raises(ConfigError):
            explain_comment("you idiot", model, vocab, ["rude"])
        with pytest.raises(ExplanationError):
            explain_comment("!!! 123 ...", model, vocab, ["bully"], cleaning=CleaningConfig())
        assert explain_comment("you idiot", model, vocab, []) == []
