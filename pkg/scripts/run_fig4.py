"""MNIST sweeps: training-set size (balanced) and rare-class size.

    python scripts/run_fig4.py sizes --out results/fig4a.csv
    python scripts/run_fig4.py rare --rare 10 --out results/fig4b.csv

The rare sweep trains one model per (digit, variant, seed): the chosen digit
keeps ``--rare`` training examples and every other digit 500. ``rare_error``
is the error on that digit's test examples, averaged over the ten digits in
the ``rare=R`` rows. At the defaults this is 60 runs, roughly 45 minutes.
"""
import argparse
import logging
from pathlib import Path

from hrbm import experiments


def main():
    p = argparse.ArgumentParser(description=__doc__, formatter_class=argparse.RawDescriptionHelpFormatter)
    p.add_argument("sweep", choices=("sizes", "rare"))
    p.add_argument("--seeds", default="1,2,3")
    p.add_argument("--variants", default="rbm,hrbm")
    p.add_argument("--sizes", default="1000,2000,3000,4000,5000")
    p.add_argument("--rare", default="10", help="comma list of rare-class counts")
    p.add_argument("--epochs", type=int)
    p.add_argument("--out", required=True)
    args = p.parse_args()
    logging.basicConfig(level=logging.INFO, format="%(asctime)s %(message)s")

    seeds = [int(s) for s in args.seeds.split(",")]
    kw = dict(variants=tuple(args.variants.split(",")), overrides={"epochs": args.epochs} if args.epochs else None)
    if args.sweep == "sizes":
        rows = experiments.fig4a(seeds, settings=tuple(int(s) for s in args.sizes.split(",")), **kw)
    else:
        rows = experiments.fig4b(seeds, settings=tuple(int(s) for s in args.rare.split(",")), **kw)
    out = Path(args.out)
    out.parent.mkdir(parents=True, exist_ok=True)
    out.write_text(experiments.rows_to_csv(rows))
    field = "test_error" if args.sweep == "sizes" else "rare_error"
    for r in rows:
        if r.seed == "mean":
            print(f"{r.setting:<14} {r.variant:<6} {field} {100 * getattr(r, field):.2f}%")


if __name__ == "__main__":
    main()
