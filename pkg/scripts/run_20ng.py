"""20 Newsgroups: hierarchical RBM with and without the orthogonality penalty.

Needs the binarized 5000-word files under ``$HRBM_DATA_DIR/20newsgroups/``::

    20newsgroups_train_binary_5000_voc.txt
    20newsgroups_test_binary_5000_voc.txt

(one document per line: 5000 binary features, then the label 0..19 in
alphabetical newsgroup order).

    python scripts/run_20ng.py --desk-scale            # n=200, 50 epochs, about 1 h
    python scripts/run_20ng.py --variants hrbm,rbm,mnl # full scale, many hours
"""
import argparse
import logging
import sys
from pathlib import Path

from hrbm import experiments
from hrbm.datasets import NAMED, data_root


def main():
    p = argparse.ArgumentParser(description=__doc__, formatter_class=argparse.RawDescriptionHelpFormatter)
    p.add_argument("--seeds", default="1,2,3")
    p.add_argument("--variants", default="hrbm")
    p.add_argument("--C", default="0,0.1", help="penalty weights for the hierarchical model")
    p.add_argument("--desk-scale", action="store_true")
    p.add_argument("--out", default="results/table2.csv")
    args = p.parse_args()
    logging.basicConfig(level=logging.INFO, format="%(asctime)s %(message)s")
    missing = [data_root() / NAMED[k][1] for k in ("20ng", "20ng-test") if not (data_root() / NAMED[k][1]).exists()]
    if missing:
        sys.exit(f"missing data files: {', '.join(map(str, missing))}")

    rows = experiments.table2(
        [int(s) for s in args.seeds.split(",")], variants=tuple(args.variants.split(",")),
        settings=tuple(float(c) for c in args.C.split(",")), desk_scale=args.desk_scale,
    )
    out = Path(args.out)
    out.parent.mkdir(parents=True, exist_ok=True)
    out.write_text(experiments.rows_to_csv(rows))
    for r in rows:
        if r.seed == "mean":
            print(f"{r.variant:<13} {r.setting:<6} mean test error {100 * r.test_error:.2f}%")


if __name__ == "__main__":
    main()
