import json

import numpy as np
import pytest

from fusenet.dataset import (CLASS_NAMES, DatasetError, Example, FeaturePipeline,
                             FeatureScaler, OneHotEncoder, fit_transform_features,
                             load_jsonl, prepare, save_jsonl, split)
from fusenet.embeddings import random_table
from fusenet.numcore import Rng


def make_example(i, label="Other", numerical=None, cats=None, text="hello loan"):
    salt = float(sum(ord(ch) for ch in str(i)) % 97)
    return Example(
        id=f"ex-{i}",
        text=text,
        numerical=numerical if numerical is not None else [salt, -1.0],
        categorical=cats if cats is not None else [("state", "a" if salt % 2 else "b")],
        label=label,
    )


class TestJsonl:
    def test_valid_three_line_file(self, tmp_path):
        path = tmp_path / "data.jsonl"
        save_jsonl([make_example(i) for i in range(3)], path)
        loaded = load_jsonl(path)
        assert len(loaded) == 3

    def test_round_trip_preserves_every_field(self, tmp_path):
        originals = [
            make_example(0, label="Funds ETA", text="café $5 a@b.co"),
            make_example(1, label="Other", numerical=[0.25, 1e-9],
                         cats=[("x", "y"), ("k", "v")]),
        ]
        path = tmp_path / "rt.jsonl"
        save_jsonl(originals, path)
        assert load_jsonl(path) == originals

    def test_unknown_label_names_line(self, tmp_path):
        path = tmp_path / "bad.jsonl"
        records = [make_example(0), make_example(1)]
        save_jsonl(records, path)
        lines = path.read_text().splitlines()
        doc = json.loads(lines[1])
        doc["label"] = "Bogus"
        lines[1] = json.dumps(doc)
        path.write_text("\n".join(lines) + "\n")
        with pytest.raises(DatasetError, match="line 2"):
            load_jsonl(path)

    def test_missing_field_named(self, tmp_path):
        path = tmp_path / "bad.jsonl"
        path.write_text('{"id": "a", "text": "t", "numerical": [], "label": "Other"}\n')
        with pytest.raises(DatasetError, match="categorical"):
            load_jsonl(path)

    def test_non_numeric_entry_rejected(self, tmp_path):
        path = tmp_path / "bad.jsonl"
        path.write_text(
            '{"id": "a", "text": "t", "numerical": [1, "x"], "categorical": [], "label": "Other"}\n'
        )
        with pytest.raises(DatasetError, match="line 1"):
            load_jsonl(path)

    def test_inconsistent_width_rejected(self, tmp_path):
        path = tmp_path / "bad.jsonl"
        save_jsonl([make_example(0, numerical=[1.0]), make_example(1, numerical=[1.0, 2.0])], path)
        with pytest.raises(DatasetError, match="line 2"):
            load_jsonl(path)


class TestScaler:
    def test_two_point_standardization(self):
        scaler = FeatureScaler.fit(np.array([[1.0], [3.0]]))
        out = scaler.transform(np.array([[1.0], [3.0]]))
        assert np.array_equal(out, [[-1.0], [1.0]])

    def test_train_columns_standardized(self):
        rng = Rng(2)
        train = rng.normal((200, 6)) * 3 + 1
        scaler = FeatureScaler.fit(train)
        scaled = scaler.transform(train)
        assert np.max(np.abs(scaled.mean(axis=0))) < 1e-10
        assert np.max(np.abs(scaled.std(axis=0) - 1.0)) < 1e-10

    def test_constant_feature_scales_to_zero(self):
        train = np.array([[2.0, 1.0], [2.0, 3.0]])
        scaler = FeatureScaler.fit(train)
        out = scaler.transform(np.array([[2.0, 2.0], [99.0, 2.0]]))
        assert out[0, 0] == 0.0 and out[1, 0] == 0.0


class TestOneHot:
    def test_unseen_category_is_zero_block(self):
        enc = OneHotEncoder.fit([make_example(0, cats=[("state", "a")]),
                                 make_example(1, cats=[("state", "b")])])
        assert enc.dim == 2
        assert np.array_equal(enc.transform_one([("state", "zzz")]), [0.0, 0.0])

    def test_known_categories_one_hot(self):
        enc = OneHotEncoder.fit([
            make_example(0, cats=[("state", "a"), ("size", "s")]),
            make_example(1, cats=[("state", "b"), ("size", "m")]),
        ])
        vec = enc.transform_one([("state", "b"), ("size", "s")])
        assert vec.tolist() == [0.0, 1.0, 1.0, 0.0]

    def test_fit_transform_features_api(self):
        train = [make_example(i) for i in range(4)]
        test = [make_example(10, cats=[("state", "never-seen")])]
        pipeline, tensors = fit_transform_features(train, test)
        assert isinstance(pipeline, FeaturePipeline)
        (num_tr, cat_tr), (num_te, cat_te) = tensors
        assert num_tr.shape == (4, 2) and cat_tr.shape == (4, 2)
        assert not cat_te.any()

    def test_pipeline_json_round_trip(self):
        train = [make_example(i) for i in range(4)]
        pipeline = FeaturePipeline.fit(train)
        clone = FeaturePipeline.from_json(json.loads(json.dumps(pipeline.to_json())))
        num_a, cat_a = pipeline.transform(train)
        num_b, cat_b = clone.transform(train)
        assert np.array_equal(num_a, num_b) and np.array_equal(cat_a, cat_b)

    def test_empty_train_rejected(self):
        with pytest.raises(DatasetError):
            FeaturePipeline.fit([])


def dataset_10_per_class():
    out = []
    for label in CLASS_NAMES:
        for i in range(10):
            out.append(make_example(f"{label}-{i}", label=label))
    return out


class TestSplit:
    def test_130_examples_split_arithmetic(self):
        train, val, test = split(dataset_10_per_class(), (0.6, 0.2, 0.2), seed=0)
        assert (len(train), len(val), len(test)) == (78, 26, 26)
        for part, expect in ((train, 6), (val, 2), (test, 2)):
            for label in CLASS_NAMES:
                assert sum(1 for ex in part if ex.label == label) == expect

    def test_deterministic(self):
        a = split(dataset_10_per_class(), seed=5)
        b = split(dataset_10_per_class(), seed=5)
        assert [[e.id for e in part] for part in a] == [[e.id for e in part] for part in b]

    def test_partition(self):
        data = dataset_10_per_class()
        train, val, test = split(data, seed=1)
        ids = [ex.id for part in (train, val, test) for ex in part]
        assert sorted(ids) == sorted(ex.id for ex in data)
        assert len(set(ids)) == len(ids)

    def test_too_small_class_rejected(self):
        data = dataset_10_per_class()[:-9]  # leaves one "Other" example
        with pytest.raises(DatasetError, match="Other"):
            split(data, seed=0)

    def test_bad_fractions(self):
        with pytest.raises(DatasetError):
            split(dataset_10_per_class(), (0.5, 0.2, 0.2), seed=0)


class TestPrepare:
    def test_prepared_shapes_and_oov(self):
        examples = [make_example(i, text="hello loan fee") for i in range(6)]
        pipeline = FeaturePipeline.fit(examples)
        table = random_table(["hello", "loan"], 4, seed=0)
        prep = prepare(examples, pipeline, table, max_seq_len=5)
        assert prep.num.shape == (6, 2)
        assert len(prep.seqs) == 6
        assert prep.seqs[0].vectors.shape == (5, 4)
        assert prep.oov_total == 6  # "fee" is OOV once per example

    def test_no_table_skips_text(self):
        examples = [make_example(i) for i in range(3)]
        pipeline = FeaturePipeline.fit(examples)
        prep = prepare(examples, pipeline, None, max_seq_len=5)
        assert prep.seqs == []
