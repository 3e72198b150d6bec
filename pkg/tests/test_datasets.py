import gzip
import struct

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from hrbm.datasets import (
    DataFormatError,
    Dataset,
    balanced_sample,
    dump_idx,
    dump_table,
    load_dataset,
    load_idx,
    load_table,
    rare_class_sample,
)


def hand_idx():
    images = struct.pack(">4I", 2051, 2, 2, 2) + bytes([0, 255, 128, 0, 10, 20, 30, 40])
    labels = struct.pack(">2I", 2049, 2) + bytes([3, 7])
    return images, labels


def ten_class(per_class=20, d=3, seed=0):
    rng = np.random.default_rng(seed)
    y = np.repeat(np.arange(10), per_class)
    return Dataset(rng.random((len(y), d)), y, 10, "synthetic")


# ---------------------------------------------------------------------------
# IDX


def test_idx_hand_buffer():
    data = load_idx(*hand_idx())
    assert data.d == 4 and len(data) == 2
    np.testing.assert_array_equal(data.X[0], [0.0, 1.0, 128 / 255, 0.0])
    assert data.y.tolist() == [3, 7]


def test_idx_wrong_magic():
    images, labels = hand_idx()
    with pytest.raises(DataFormatError, match="magic"):
        load_idx(struct.pack(">I", 2052) + images[4:], labels)
    with pytest.raises(DataFormatError, match="magic"):
        load_idx(images, struct.pack(">I", 2052) + labels[4:])


def test_idx_count_mismatch_and_truncation():
    images, labels = hand_idx()
    with pytest.raises(DataFormatError, match="2 images but 1 labels"):
        load_idx(images, struct.pack(">2I", 2049, 1) + bytes([3]))
    with pytest.raises(DataFormatError, match="pixel bytes"):
        load_idx(images[:-1], labels)
    with pytest.raises(DataFormatError, match="label bytes"):
        load_idx(images, labels[:-1])
    with pytest.raises(DataFormatError, match="truncated header"):
        load_idx(images[:10], labels)


def test_idx_empty():
    data = load_idx(struct.pack(">4I", 2051, 0, 2, 2), struct.pack(">2I", 2049, 0))
    assert len(data) == 0 and data.d == 4


@settings(max_examples=50, deadline=None)
@given(st.integers(0, 2**32 - 1), st.integers(0, 12), st.integers(1, 5), st.integers(1, 5))
def test_idx_lossless(seed, count, rows, cols):
    rng = np.random.default_rng(seed)
    pixels = rng.integers(0, 256, (count, rows * cols), dtype=np.uint8)
    y = rng.integers(0, 10, count)
    data = load_idx(*dump_idx(pixels, y, rows, cols))
    assert np.array_equal(np.rint(data.X * 255).astype(np.uint8), pixels)
    assert np.array_equal(data.y, y)


def test_load_dataset_idx_files(tmp_path):
    images, labels = hand_idx()
    (tmp_path / "img.gz").write_bytes(gzip.compress(images))
    (tmp_path / "lab").write_bytes(labels)
    data = load_dataset(tmp_path / "img.gz", tmp_path / "lab")
    assert data.y.tolist() == [3, 7]


def test_load_dataset_named_uses_data_root(tmp_path, monkeypatch):
    images, labels = hand_idx()
    (tmp_path / "mnist").mkdir()
    (tmp_path / "mnist" / "train-images-idx3-ubyte.gz").write_bytes(gzip.compress(images))
    (tmp_path / "mnist" / "train-labels-idx1-ubyte.gz").write_bytes(gzip.compress(labels))
    monkeypatch.setenv("HRBM_DATA_DIR", str(tmp_path))
    assert load_dataset("mnist").d == 4


def test_load_dataset_missing_file(tmp_path):
    with pytest.raises(OSError):
        load_dataset(tmp_path / "nope.txt")


# ---------------------------------------------------------------------------
# tables


def test_table_hand_text():
    data = load_table("1 0 1 0\n0 0 1 2\n")
    assert data.d == 3 and data.K == 3
    np.testing.assert_array_equal(data.X[0], [1, 0, 1])
    assert data.y[0] == 0


def test_table_label_first():
    data = load_table("2 0 0.5\n0 1 1\n", label_position="first")
    assert data.y.tolist() == [2, 0]
    np.testing.assert_array_equal(data.X[0], [0, 0.5])


@pytest.mark.parametrize(
    "text, match",
    [
        ("", "empty"),
        ("\n\n", "empty"),
        ("1 0 1 0\n0 1 2\n", "line 2"),
        ("1 0 x 0\n", "non-numeric"),
        ("1 0 1 0.5\n", "non-numeric"),
        ("1 0 1.5 0\n", r"outside \[0, 1\]"),
    ],
)
def test_table_errors(text, match):
    with pytest.raises(DataFormatError, match=match):
        load_table(text)


@settings(max_examples=50, deadline=None)
@given(st.integers(0, 2**32 - 1), st.integers(1, 10), st.integers(1, 6))
def test_table_roundtrip(seed, rows, d):
    rng = np.random.default_rng(seed)
    y = rng.integers(0, 4, rows)
    y[0] = 3
    data = Dataset(rng.random((rows, d)), y, 4)
    again = load_table(dump_table(data))
    assert np.array_equal(again.X, data.X) and np.array_equal(again.y, data.y)


# ---------------------------------------------------------------------------
# sampling


def test_balanced_totals():
    data = ten_class(per_class=600)
    assert balanced_sample(data, total=5000).class_counts().tolist() == [500] * 10
    assert balanced_sample(data, total=1000).class_counts().tolist() == [100] * 10
    assert len(balanced_sample(data, per_class=0)) == 0


def test_balanced_errors():
    data = ten_class(per_class=5)
    with pytest.raises(ValueError, match="too few"):
        balanced_sample(data, per_class=6)
    with pytest.raises(ValueError, match="divisible"):
        balanced_sample(data, total=15)
    with pytest.raises(ValueError, match="exactly one"):
        balanced_sample(data)


def test_rare_class_protocol():
    data = ten_class(per_class=600)
    sample = rare_class_sample(data, 0, 10, 500, seed=1)
    assert len(sample) == 4510
    assert sample.class_counts().tolist() == [10] + [500] * 9


def test_rare_equal_to_other_matches_balanced():
    data = ten_class(per_class=30)
    a = rare_class_sample(data, 4, 12, 12, seed=3)
    b = balanced_sample(data, per_class=12, seed=3)
    assert np.array_equal(a.X, b.X) and np.array_equal(a.y, b.y)


def test_rare_zero_warns():
    with pytest.warns(UserWarning, match="absent"):
        sample = rare_class_sample(ten_class(), 2, 0, 5)
    assert sample.class_counts()[2] == 0
    assert len(np.unique(sample.y)) == 9


def test_rare_insufficient():
    with pytest.raises(ValueError, match="too few"):
        rare_class_sample(ten_class(per_class=5), 0, 1, 6)


@settings(max_examples=40, deadline=None)
@given(st.integers(0, 10_000), st.integers(0, 20), st.integers(0, 9))
def test_sampling_deterministic_no_duplicates(seed, per_class, rare):
    data = ten_class()
    # tag each example by its row so duplicates are visible
    data = Dataset(np.arange(len(data.y), dtype=float)[:, None] / len(data.y), data.y, 10)
    for sample_fn in (lambda: balanced_sample(data, per_class=per_class, seed=seed),
                      lambda: rare_class_sample(data, rare, min(per_class, 3), per_class, seed=seed)):
        import warnings

        with warnings.catch_warnings():
            warnings.simplefilter("ignore")
            a, b = sample_fn(), sample_fn()
        assert np.array_equal(a.X, b.X) and np.array_equal(a.y, b.y)
        assert len(np.unique(a.X[:, 0])) == len(a)
