"""Tests for cleaning, vocabulary building and subword encoding."""

import unicodedata
from pathlib import Path

import numpy as np
import pytest

from src.config import load_default_config
from src.exceptions import ConfigError, VocabularyError
from src.text import (
    CleaningConfig,
    SubwordTokenizer,
    Vocabulary,
    build_vocab,
    clean,
    decode,
    detokenize,
    encode,
    encode_batch,
    encode_text,
    load_cleaning_config,
)

REPO_ROOT = Path(__file__).resolve().parent.parent


@pytest.fixture
def abba_vocab():
    # ids: specials 0-3, a=4, b=5, ##b=6, ##a=7, ab=8, ba=9
    return build_vocab(["ab ab", "ba"], max_size=100)


class TestCleaning:
    def test_strips_urls_digits_and_symbols(self):
        assert clean("Heyyyy!!! Visit https://spam.example NOW 123", CleaningConfig()) == "heyy visit now"

    def test_keeps_bengali_and_drops_other_scripts(self):
        bengali = "তুমি বাজে লোক"
        assert clean(f"{bengali}। привет hi", CleaningConfig()) == unicodedata.normalize("NFC", bengali) + " hi"

    def test_abbreviations_and_stopwords(self):
        cfg = CleaningConfig(stopwords={"are"}, abbreviation_map={"u": "you"})
        assert clean("u are sooo bad", cfg) == "you soo bad"

    def test_abbreviation_exposed_by_digit_removal(self):
        cfg = CleaningConfig(abbreviation_map={"u": "you"})
        assert clean("u2 bad", cfg) == "you bad"

    def test_stemmer_hook(self):
        cfg = CleaningConfig(stemmer=lambda w: w[:3])
        assert clean("running fast", cfg) == "run fas"

    @pytest.mark.parametrize("text", [
        "U R sooooo DUMB!!! www.x.com",
        "pls msg me 2day ur idiot",
        "   ",
        "এই লোক খুব খারাপ!!! 100%",
    ])
    def test_idempotent(self, text):
        cfg = load_cleaning_config(load_default_config()["cleaning"], REPO_ROOT)
        once = clean(text, cfg)
        assert clean(once, cfg) == once

    def test_invalid_configs(self):
        with pytest.raises(ConfigError):
            CleaningConfig(allowed_script_ranges=((0x7A, 0x61),))
        with pytest.raises(ConfigError):
            CleaningConfig(abbreviation_map={"u": "you", "you": "ye"})
        with pytest.raises(ConfigError):
            CleaningConfig(max_char_repeat=0)

    def test_load_default_resources(self):
        cfg = load_cleaning_config(load_default_config()["cleaning"], REPO_ROOT)
        assert "the" in cfg.stopwords
        assert cfg.abbreviation_map["pls"] == "please"
        assert clean("pls stop the msg", cfg) == "please stop message"

    def test_missing_resource_files_are_skipped(self, tmp_path):
        cfg = load_cleaning_config({"stopwords_path": "nope.txt"}, tmp_path)
        assert cfg.stopwords == frozenset()


class TestVocabulary:
    def test_allocation_order(self, abba_vocab):
        assert abba_vocab.id_to_token == [
            "[PAD]", "[UNK]", "[CLS]", "[SEP]", "a", "b", "##b", "##a", "ab", "ba",
        ]

    def test_cap_and_min_freq(self):
        assert len(build_vocab(["ab ab", "ba"], max_size=6)) == 6
        assert "ba" not in build_vocab(["ab ab", "ba"], max_size=100, min_freq=2)

    def test_deterministic(self):
        corpus = ["kill you now", "win lottery now", "you idiot"]
        assert build_vocab(corpus, 50) == build_vocab(list(corpus), 50)

    def test_invalid_inputs(self):
        with pytest.raises(ConfigError):
            build_vocab(["a"], max_size=4)
        with pytest.raises(VocabularyError):
            build_vocab([], max_size=10)
        with pytest.raises(VocabularyError):
            Vocabulary(["[UNK]", "[PAD]", "[CLS]", "[SEP]"])
        with pytest.raises(VocabularyError):
            Vocabulary(["[PAD]", "[UNK]", "[CLS]", "[SEP]", "x", "x"])

    def test_save_load(self, abba_vocab, tmp_path):
        path = tmp_path / "vocab.txt"
        abba_vocab.save(path)
        assert Vocabulary.load(path) == abba_vocab
        with pytest.raises(VocabularyError):
            Vocabulary.load(tmp_path / "missing.txt")


class TestTokenizer:
    def test_greedy_longest_match(self, abba_vocab):
        tokenizer = SubwordTokenizer(abba_vocab)
        assert tokenizer.tokenize("abba ba") == ["[CLS]", "ab", "##b", "##a", "ba", "[SEP]"]
        assert tokenizer.tokenize("abc") == ["[CLS]", "[UNK]", "[SEP]"]
        assert tokenizer.tokenize("") == ["[CLS]", "[SEP]"]

    def test_encode_pads_and_masks(self, abba_vocab):
        seq = encode(["[CLS]", "ab", "[SEP]"], abba_vocab, max_len=5)
        np.testing.assert_array_equal(seq.ids, [2, 8, 3, 0, 0])
        np.testing.assert_array_equal(seq.mask, [1, 1, 1, 0, 0])
        assert len(seq) == 5

    def test_encode_truncates_keeping_sep(self, abba_vocab):
        seq = encode(["[CLS]", "ab", "##b", "##a", "[SEP]"], abba_vocab, max_len=3)
        np.testing.assert_array_equal(seq.ids, [2, 8, 3])
        assert seq.original_token_count == 5

    def test_encode_rejects_short_max_len(self, abba_vocab):
        with pytest.raises(ConfigError):
            encode(["[CLS]", "[SEP]"], abba_vocab, max_len=1)

    def test_decode_and_detokenize(self, abba_vocab):
        seq = encode_text("abba", SubwordTokenizer(abba_vocab), max_len=8)
        tokens = decode(seq.ids, abba_vocab)
        assert tokens == ["[CLS]", "ab", "##b", "##a", "[SEP]"]
        assert detokenize(tokens) == "abba"

    def test_encode_batch_cleans(self, small_vocab):
        cfg = CleaningConfig()
        tokenizer = SubwordTokenizer(small_vocab)
        batch = encode_batch(["NICE song!!!", "nice song"], tokenizer, max_len=8, cleaning=cfg)
        np.testing.assert_array_equal(batch[0].ids, batch[1].ids)
        assert all(s.mask.sum() == 4 for s in batch)
