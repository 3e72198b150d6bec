"""Build the desk-scale MNIST IDX files from two offline package archives.

Sources (fetch them with your package manager, then point this script at them):

  * the mlxtend wheel (``pip download --no-deps mlxtend``), which bundles
    ``mnist_5k.csv.gz``: 5000 MNIST digits, 500 per class;
  * the npm ``mnist`` tarball (``npm pack mnist``), which bundles about 10000
    digits as JSON with pixel values rounded to 3 decimals of x/255.

Every mlxtend digit also appears in the npm set. The training file holds the
5000 mlxtend digits; the test file holds the remaining npm digits, so the two
splits are disjoint. Output goes to ``<out>/{train,test}-{images-idx3,labels-idx1}-ubyte.gz``.
"""
import argparse
import gzip
import io
import json
import tarfile
import zipfile
from pathlib import Path

import numpy as np

from hrbm.datasets import dump_idx


def mlxtend_digits(wheel: Path):
    with zipfile.ZipFile(wheel) as z:
        raw = gzip.decompress(z.read("mlxtend/data/data/mnist_5k.csv.gz")).decode()
    table = np.loadtxt(io.StringIO(raw), delimiter=",", dtype=np.int64)
    return table[:, :-1].astype(np.uint8), table[:, -1].astype(np.uint8)


def npm_digits(tarball: Path):
    images, labels = [], []
    with tarfile.open(tarball) as tar:
        for k in range(10):
            member = tar.extractfile(f"package/src/digits/{k}.json")
            values = np.array(json.load(member)["data"], dtype=float).reshape(-1, 784)
            pixels = np.rint(values * 255)
            if np.abs(np.round(pixels / 255, 3) - values).max() > 0:
                raise ValueError(f"digit {k}: pixel values are not rounded multiples of 1/255")
            images.append(pixels.astype(np.uint8))
            labels.append(np.full(len(values), k, dtype=np.uint8))
    return np.vstack(images), np.concatenate(labels)


def main():
    ap = argparse.ArgumentParser(description=__doc__, formatter_class=argparse.RawDescriptionHelpFormatter)
    ap.add_argument("--mlxtend-wheel", type=Path, required=True)
    ap.add_argument("--npm-tarball", type=Path, required=True)
    ap.add_argument("--out", type=Path, default=Path("data/mnist"))
    args = ap.parse_args()

    train_x, train_y = mlxtend_digits(args.mlxtend_wheel)
    pool_x, pool_y = npm_digits(args.npm_tarball)
    seen = {bytes(row) for row in train_x}
    keep = np.array([bytes(row) not in seen for row in pool_x])
    test_x, test_y = pool_x[keep], pool_y[keep]
    print(f"train {len(train_x)} per class {np.bincount(train_y).tolist()}")
    print(f"test  {len(test_x)} per class {np.bincount(test_y).tolist()} ({(~keep).sum()} overlapping digits dropped)")

    args.out.mkdir(parents=True, exist_ok=True)
    for split, x, y in (("train", train_x, train_y), ("test", test_x, test_y)):
        images, labels = dump_idx(x, y, 28, 28)
        (args.out / f"{split}-images-idx3-ubyte.gz").write_bytes(gzip.compress(images, mtime=0))
        (args.out / f"{split}-labels-idx1-ubyte.gz").write_bytes(gzip.compress(labels, mtime=0))


if __name__ == "__main__":
    main()
