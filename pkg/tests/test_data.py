"""Tests for dataset parsing, splitting, resampling and the synthetic corpus."""

import numpy as np
import pytest

from src import LABELS
from src.data import (
    LabeledExample,
    PLANTED_TOKENS,
    class_counts,
    generate_planted_corpus,
    kfold_partition,
    load_dataset,
    oversample,
    read_provenance,
    resample,
    resampling_table,
    split_dataset,
    undersample,
    write_dataset,
)
from src.exceptions import ConfigError, DatasetFormatError, ResamplingError


def single_label(counts, n_unlabelled=0):
    examples = []
    for c, n in enumerate(counts):
        for i in range(n):
            labels = tuple(int(j == c) for j in range(len(LABELS)))
            examples.append(LabeledExample(f"{LABELS[c]} {i}", labels, f"s:{c}:{i}"))
    examples += [LabeledExample(f"clean {i}", (0,) * 5, f"u:{i}") for i in range(n_unlabelled)]
    return examples


@pytest.fixture
def planted():
    return generate_planted_corpus(200, np.random.default_rng(3))


class TestLoadDataset:
    def test_fixture(self, fixture_csv):
        examples = load_dataset(fixture_csv)
        assert len(examples) == 10
        assert examples[0].text == "you are an idiot, go away"
        assert examples[0].labels == (1, 0, 0, 0, 0)
        assert examples[0].example_id == "comments:2"
        assert examples[2].positive_labels == (2, 3)
        assert examples[8].text == "কি সুন্দর গান"
        assert class_counts(examples).counts == (3, 1, 1, 3, 2)

    def test_drops_empty_and_duplicate_texts(self, tmp_path):
        path = tmp_path / "d.csv"
        path.write_text(
            "text,bully,sexual,religious,threat,spam\nhello,0,0,0,0,0\n,1,0,0,0,0\nhello,1,0,0,0,0\nbye,0,0,0,0,1\n",
            encoding="utf-8",
        )
        examples = load_dataset(path)
        assert [e.text for e in examples] == ["hello", "bye"]
        assert examples[0].labels == (0, 0, 0, 0, 0)

    def test_bad_header(self, tmp_path):
        path = tmp_path / "d.csv"
        path.write_text("comment,bully,sexual,religious,threat,spam\nhi,0,0,0,0,0\n", encoding="utf-8")
        with pytest.raises(DatasetFormatError) as info:
            load_dataset(path)
        assert info.value.line == 1

    def test_non_binary_label_reports_line(self, tmp_path):
        path = tmp_path / "d.csv"
        path.write_text("text,bully,sexual,religious,threat,spam\nok,0,0,0,0,0\nbad,2,0,0,0,0\n", encoding="utf-8")
        with pytest.raises(DatasetFormatError) as info:
            load_dataset(path)
        assert info.value.line == 3

    def test_missing_file(self, tmp_path):
        with pytest.raises(FileNotFoundError):
            load_dataset(tmp_path / "absent.csv")

    def test_write_with_provenance(self, tmp_path, fixture_csv):
        examples = load_dataset(fixture_csv)
        path = write_dataset(oversample(examples, np.random.default_rng(0)), tmp_path / "t.csv", "oversampled")
        assert read_provenance(path) == "oversampled"
        assert read_provenance(fixture_csv) == "original"
        reloaded = load_dataset(path)
        assert reloaded[0].text == examples[0].text
        with pytest.raises(ConfigError):
            write_dataset(examples, tmp_path / "x.csv", "shuffled")


class TestSplit:
    def test_partition_and_ratios(self, planted):
        split = split_dataset(planted, rng=np.random.default_rng(1))
        ids = [e.example_id for e in split.train + split.validation + split.test]
        assert sorted(ids) == sorted(e.example_id for e in planted)
        assert len(split.train) == pytest.approx(160, abs=6)
        assert len(split.validation) == pytest.approx(20, abs=6)
        assert split.provenance == "original"

    def test_seeded(self, planted):
        a = split_dataset(planted, rng=np.random.default_rng(1))
        b = split_dataset(planted, rng=np.random.default_rng(1))
        assert a.test == b.test

    def test_rejects_bad_ratios(self, planted):
        with pytest.raises(ConfigError):
            split_dataset(planted, ratios=(0.5, 0.5, 0.5))

    def test_check_disjoint(self, planted):
        split = split_dataset(planted, rng=np.random.default_rng(1))
        split.test.append(split.train[0])
        with pytest.raises(ValueError):
            split.check_disjoint()


class TestResampling:
    def test_single_label_undersample_hits_minimum(self):
        train = single_label([5, 2, 3, 4, 2], n_unlabelled=2)
        result = undersample(train, np.random.default_rng(0))
        assert class_counts(result).counts == (2, 2, 2, 2, 2)
        assert sum(1 for e in result if not e.positive_labels) == 2
        positions = [train.index(e) for e in result]
        assert positions == sorted(positions)

    def test_single_label_oversample_hits_maximum(self):
        train = single_label([5, 2, 3, 4, 2])
        result = oversample(train, np.random.default_rng(0))
        assert class_counts(result).counts == (5, 5, 5, 5, 5)
        assert result[:len(train)] == train

    def test_multilabel_bounds(self, planted):
        original = class_counts(planted).counts
        under = class_counts(undersample(planted, np.random.default_rng(0))).counts
        over = class_counts(oversample(planted, np.random.default_rng(0))).counts
        assert all(u <= o for u, o in zip(under, original))
        assert min(under) == min(original)
        assert all(v >= max(original) for v in over)

    def test_seeded(self, planted):
        a = oversample(planted, np.random.default_rng(9))
        b = oversample(planted, np.random.default_rng(9))
        assert a == b

    def test_missing_label(self):
        train = single_label([3, 0, 1, 1, 1])
        with pytest.raises(ResamplingError):
            undersample(train, np.random.default_rng(0))
        with pytest.raises(ResamplingError):
            oversample(train, np.random.default_rng(0))

    def test_dispatch(self, planted):
        assert resample(planted, "none", None) == planted
        with pytest.raises(ConfigError):
            resample(planted, "smote", np.random.default_rng(0))
        with pytest.raises(ConfigError):
            resample(planted, "over", None)

    def test_table(self):
        train = single_label([5, 2, 3, 4, 2])
        rows = resampling_table(train, undersample(train, np.random.default_rng(0)))
        assert [r["split"] for r in rows] == ["Imbalance", "Undersampled"]
        assert rows[0]["bully"] == 5 and rows[0]["examples"] == 16
        assert rows[1]["examples"] == 10


class TestKFold:
    def test_folds_cover_input(self, planted):
        folds = kfold_partition(planted[:53], k=5, seed=4)
        held = [e.example_id for _, h in folds for e in h]
        assert sorted(held) == sorted(e.example_id for e in planted[:53])
        sizes = [len(h) for _, h in folds]
        assert max(sizes) - min(sizes) <= 1
        for train, h in folds:
            assert not {e.example_id for e in train} & {e.example_id for e in h}

    def test_seeded(self, planted):
        a = [h for _, h in kfold_partition(planted, 5, seed=4)]
        b = [h for _, h in kfold_partition(planted, 5, seed=4)]
        assert a == b

    def test_invalid(self, planted):
        with pytest.raises(ConfigError):
            kfold_partition(planted, 1, seed=0)
        with pytest.raises(ResamplingError):
            kfold_partition(planted[:3], 5, seed=0)


def test_planted_corpus_labels_follow_triggers(planted):
    assert len({e.text for e in planted}) == 200
    for i, example in enumerate(planted[:5]):
        assert example.positive_labels == (i,)
    for example in planted:
        words = set(example.text.split())
        assert example.labels == tuple(int(PLANTED_TOKENS[name] in words) for name in LABELS)


def test_planted_corpus_too_small_to_be_distinct():
    # without filler words only label subsets and their orderings vary
    with pytest.raises(ConfigError):
        generate_planted_corpus(400, np.random.default_rng(0), filler_range=(0, 0))
