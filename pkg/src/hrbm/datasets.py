"""Dataset ingestion (MNIST IDX, whitespace tables) and sampling protocols."""
from __future__ import annotations

import gzip
import os
import struct
import warnings
from dataclasses import dataclass
from pathlib import Path
from typing import Optional

import numpy as np

IMAGES_MAGIC = 2051
LABELS_MAGIC = 2049


class DataFormatError(ValueError):
    pass


@dataclass
class Dataset:
    X: np.ndarray  # (N, d) features in [0, 1]
    y: np.ndarray  # (N,) class indices
    K: int
    provenance: str = ""

    def __post_init__(self):
        if self.X.ndim != 2 or len(self.X) != len(self.y):
            raise ValueError(f"X{self.X.shape} and y{self.y.shape} do not describe the same examples")
        if len(self.y) and (self.y.min() < 0 or self.y.max() >= self.K):
            raise ValueError(f"labels outside 0..{self.K - 1}")

    @property
    def d(self) -> int:
        return self.X.shape[1]

    def __len__(self):
        return len(self.y)

    def class_counts(self) -> np.ndarray:
        return np.bincount(self.y, minlength=self.K)

    def subset(self, idx, tag: str) -> "Dataset":
        idx = np.asarray(idx, dtype=int)
        return Dataset(self.X[idx], self.y[idx], self.K, f"{self.provenance} | {tag}")


def _header(buf: bytes, count: int, what: str) -> tuple[int, ...]:
    if len(buf) < 4 * count:
        raise DataFormatError(f"{what}: truncated header")
    return struct.unpack(f">{count}I", buf[: 4 * count])


def load_idx(images: bytes, labels: bytes, provenance: str = "idx") -> Dataset:
    """Parse an IDX image/label pair; pixels are scaled by 1/255."""
    magic, count, rows, cols = _header(images, 4, "images")
    if magic != IMAGES_MAGIC:
        raise DataFormatError(f"images: wrong magic {magic} (expected {IMAGES_MAGIC})")
    lmagic, lcount = _header(labels, 2, "labels")
    if lmagic != LABELS_MAGIC:
        raise DataFormatError(f"labels: wrong magic {lmagic} (expected {LABELS_MAGIC})")
    if count != lcount:
        raise DataFormatError(f"{count} images but {lcount} labels")
    d = rows * cols
    pixels = images[16:]
    if len(pixels) < count * d:
        raise DataFormatError(f"images: expected {count * d} pixel bytes, found {len(pixels)}")
    if len(labels) - 8 < count:
        raise DataFormatError(f"labels: expected {count} label bytes, found {len(labels) - 8}")
    X = np.frombuffer(pixels, dtype=np.uint8, count=count * d).reshape(count, d) / 255.0
    y = np.frombuffer(labels, dtype=np.uint8, offset=8, count=count).astype(int)
    K = int(y.max()) + 1 if count else 0
    return Dataset(X, y, K, provenance)


def dump_idx(X_bytes: np.ndarray, y: np.ndarray, rows: int, cols: int) -> tuple[bytes, bytes]:
    """Encode uint8 pixels (N, rows*cols) and labels as an IDX pair."""
    X_bytes = np.asarray(X_bytes, dtype=np.uint8)
    images = struct.pack(">4I", IMAGES_MAGIC, len(X_bytes), rows, cols) + X_bytes.tobytes()
    labels = struct.pack(">2I", LABELS_MAGIC, len(y)) + np.asarray(y, dtype=np.uint8).tobytes()
    return images, labels


def load_table(text: str, label_position: str = "last", provenance: str = "table") -> Dataset:
    """Whitespace table: one example per line, features in [0, 1] plus an integer label."""
    if label_position not in ("first", "last"):
        raise ValueError("label_position must be 'first' or 'last'")
    rows, labels = [], []
    width = None
    for lineno, line in enumerate(text.splitlines(), start=1):
        tokens = line.split()
        if not tokens:
            continue
        if width is None:
            width = len(tokens)
        elif len(tokens) != width:
            raise DataFormatError(f"line {lineno}: {len(tokens) - 1} features, expected {width - 1}")
        label_tok = tokens[-1] if label_position == "last" else tokens[0]
        feats = tokens[:-1] if label_position == "last" else tokens[1:]
        try:
            labels.append(int(label_tok))
            values = [float(t) for t in feats]
        except ValueError:
            raise DataFormatError(f"line {lineno}: non-numeric token") from None
        if any(not 0.0 <= v <= 1.0 for v in values):
            raise DataFormatError(f"line {lineno}: feature outside [0, 1]")
        rows.append(values)
    if width is None:
        raise DataFormatError("empty table: feature count cannot be determined")
    if width < 2:
        raise DataFormatError("each row needs at least one feature and a label")
    y = np.array(labels, dtype=int)
    if y.min() < 0:
        raise DataFormatError("negative class label")
    return Dataset(np.array(rows, dtype=float), y, int(y.max()) + 1, provenance)


def dump_table(data: Dataset) -> str:
    """Inverse of ``load_table`` (label last), using shortest round-trip float repr."""
    lines = [" ".join([*(repr(float(v)) for v in row), str(int(k))]) for row, k in zip(data.X, data.y)]
    return "\n".join(lines) + ("\n" if lines else "")


def _sample_classes(data: Dataset, counts: np.ndarray, seed: int, tag: str) -> Dataset:
    have = data.class_counts()
    short = np.flatnonzero(have < counts)
    if short.size:
        raise ValueError(f"classes {short.tolist()} have too few examples ({have[short].tolist()} < {counts[short].tolist()})")
    rng = np.random.default_rng(seed)
    chosen = [rng.choice(np.flatnonzero(data.y == k), size=int(counts[k]), replace=False) for k in range(data.K)]
    idx = np.concatenate(chosen) if chosen else np.zeros(0, dtype=int)
    return data.subset(idx[rng.permutation(len(idx))], f"{tag} seed={seed}")


def balanced_sample(data: Dataset, per_class: Optional[int] = None, total: Optional[int] = None, seed: int = 1) -> Dataset:
    """Equal number of examples from every class, without replacement, shuffled."""
    if (per_class is None) == (total is None):
        raise ValueError("give exactly one of per_class or total")
    if total is not None:
        if total % data.K:
            raise ValueError(f"total {total} is not divisible by {data.K} classes")
        per_class = total // data.K
    counts = np.full(data.K, per_class)
    return _sample_classes(data, counts, seed, f"balanced per_class={per_class}")


def rare_class_sample(data: Dataset, rare_class: int, rare_count: int, other_count: int, seed: int = 1) -> Dataset:
    """``rare_count`` examples of one class and ``other_count`` of every other class."""
    if rare_count == 0:
        warnings.warn(f"rare_count=0: class {rare_class} is absent from the sample")
    counts = np.full(data.K, other_count)
    counts[rare_class] = rare_count
    return _sample_classes(data, counts, seed, f"rare class={rare_class} rare={rare_count} other={other_count}")


# ---------------------------------------------------------------------------
# files on disk


def data_root() -> Path:
    return Path(os.environ.get("HRBM_DATA_DIR", "data"))


def read_bytes(path) -> bytes:
    path = Path(path)
    raw = path.read_bytes()
    return gzip.decompress(raw) if path.suffix == ".gz" else raw


def resolve(path) -> Path:
    """Return ``path`` if it exists, else the same relative path under the data root."""
    p = Path(path)
    if p.exists() or p.is_absolute():
        return p
    for candidate in (data_root() / p, data_root() / f"{p}.gz"):
        if candidate.exists():
            return candidate
    return p


NAMED = {
    "mnist": ("idx", "mnist/train-images-idx3-ubyte.gz", "mnist/train-labels-idx1-ubyte.gz"),
    "mnist-test": ("idx", "mnist/test-images-idx3-ubyte.gz", "mnist/test-labels-idx1-ubyte.gz"),
    "20ng": ("table", "20newsgroups/20newsgroups_train_binary_5000_voc.txt", None),
    "20ng-valid": ("table", "20newsgroups/20newsgroups_valid_binary_5000_voc.txt", None),
    "20ng-test": ("table", "20newsgroups/20newsgroups_test_binary_5000_voc.txt", None),
}


def load_dataset(data, labels=None, fmt: Optional[str] = None, label_position: str = "last") -> Dataset:
    """Load from files, or a named dataset (``mnist``, ``20ng``, ...) under ``HRBM_DATA_DIR``."""
    if labels is None and str(data) in NAMED:
        fmt, data, labels = NAMED[str(data)]
        data = data_root() / data
        labels = data_root() / labels if labels else None
    data = resolve(data)
    if fmt is None:
        fmt = "idx" if labels is not None else "table"
    if fmt == "idx":
        if labels is None:
            raise ValueError("IDX format needs a labels file")
        labels = resolve(labels)
        return load_idx(read_bytes(data), read_bytes(labels), provenance=str(data))
    if fmt == "table":
        return load_table(read_bytes(data).decode("utf-8"), label_position, provenance=str(data))
    raise ValueError(f"unknown format {fmt!r}")
