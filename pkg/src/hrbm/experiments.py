"""Experiment protocols: MNIST subset comparison, sample-size and rare-class sweeps, 20 Newsgroups."""
from __future__ import annotations

import csv
import io
import logging
from dataclasses import dataclass
from typing import Callable, Optional, Sequence

import numpy as np

from .config import TrainConfig
from .datasets import Dataset, balanced_sample, load_dataset, rare_class_sample
from .models import train_variant
from .taxonomy import load_tree

log = logging.getLogger(__name__)

TABLE1_VARIANTS = ("rbm", "hrbm", "cascade-hard", "cascade-soft", "hhrbm", "mnl", "corrmnl")
MNIST_CONFIG = dict(hidden=100, lr=0.1, C=0.1, epochs=100)
MNIST_HHRBM_WIDTHS = (100, 50, 25, 20)
NG_CONFIG = dict(hidden=1500, lr=0.01, C=0.1, epochs=200)
NG_BASELINE_CONFIG = dict(hidden=2000, lr=0.1, epochs=100)
NG_HHRBM_WIDTHS = (1000, 500, 200, 200)
NG_DESK = dict(hidden=200, epochs=50)

FIELDS = ("protocol", "setting", "variant", "seed", "test_error", "rare_error")


@dataclass
class ResultRow:
    protocol: str
    setting: str
    variant: str
    seed: str
    test_error: float
    rare_error: Optional[float] = None

    def as_csv(self) -> list[str]:
        rare = "" if self.rare_error is None else f"{self.rare_error:.6f}"
        return [self.protocol, self.setting, self.variant, self.seed, f"{self.test_error:.6f}", rare]


def _sort_key(row: ResultRow):
    def num(s):
        try:
            return (0, float(s.split("=")[-1]), s)
        except ValueError:
            return (1, 0.0, s)

    return (row.protocol, num(row.setting), row.variant, num(row.seed))


def rows_to_csv(rows: Sequence[ResultRow]) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(FIELDS)
    for row in sorted(rows, key=_sort_key):
        writer.writerow(row.as_csv())
    return buf.getvalue()


def mean_rows(rows: Sequence[ResultRow], over: str) -> list[ResultRow]:
    """Average rows sharing every key except ``over`` ('seed' or 'setting')."""
    groups: dict[tuple, list[ResultRow]] = {}
    for r in rows:
        key = (r.protocol, r.variant) + ((r.setting,) if over == "seed" else (r.seed,))
        groups.setdefault(key, []).append(r)
    out = []
    for key, group in groups.items():
        rare = [r.rare_error for r in group if r.rare_error is not None]
        setting = key[2] if over == "seed" else "mean"
        seed = "mean" if over == "seed" else key[2]
        out.append(
            ResultRow(key[0], setting, key[1], seed, float(np.mean([r.test_error for r in group])),
                      float(np.mean(rare)) if rare else None)
        )
    return out


def variant_config(variant: str, base: dict, seed: int, overrides: dict, hhrbm_widths) -> TrainConfig:
    kw = dict(base, **overrides)
    if variant == "hhrbm":
        kw["hidden"] = tuple(hhrbm_widths)
    return TrainConfig(variant=variant, seed=seed, **kw)


def run_one(variant: str, train: Dataset, test: Dataset, tree, config: TrainConfig, rare_class=None) -> ResultRow:
    trained = train_variant(train.X, train.y, train.K, config, tree if variant not in ("rbm", "mnl") else None)
    pred = trained.predict(test.X)
    err = float(np.mean(pred != test.y))
    rare = None
    if rare_class is not None:
        mask = test.y == rare_class
        rare = float(np.mean(pred[mask] != rare_class))
    log.info("%s seed=%d err=%.4f rare=%s (%.1fs)", variant, config.seed, err, rare, trained.metrics.seconds)
    return ResultRow("", "", variant, str(config.seed), err, rare)


def _mnist(test_size: int, seed: int):
    return load_dataset("mnist"), balanced_sample(load_dataset("mnist-test"), total=test_size, seed=seed)


def table1(seeds, variants=TABLE1_VARIANTS, overrides=None, train_size=5000, test_size=1000, progress: Optional[Callable] = None):
    tree = load_tree("mnist")
    rows = []
    for seed in seeds:
        pool, test = _mnist(test_size, seed)
        train = balanced_sample(pool, total=train_size, seed=seed)
        for v in variants:
            cfg = variant_config(v, MNIST_CONFIG, seed, overrides or {}, MNIST_HHRBM_WIDTHS)
            row = run_one(v, train, test, tree, cfg)
            row.protocol, row.setting = "table1", f"n_train={train_size}"
            rows.append(row)
            if progress:
                progress(row)
    return rows + mean_rows(rows, over="seed")


def fig4a(seeds, variants=("rbm", "hrbm"), settings=(1000, 2000, 3000, 4000, 5000), overrides=None, test_size=1000, progress=None):
    tree = load_tree("mnist")
    rows = []
    for seed in seeds:
        pool, test = _mnist(test_size, seed)
        for size in settings:
            train = balanced_sample(pool, total=int(size), seed=seed)
            for v in variants:
                row = run_one(v, train, test, tree, variant_config(v, MNIST_CONFIG, seed, overrides or {}, MNIST_HHRBM_WIDTHS))
                row.protocol, row.setting = "fig4a", f"n_train={int(size)}"
                rows.append(row)
                if progress:
                    progress(row)
    return rows + mean_rows(rows, over="seed")


def fig4b(seeds, variants=("rbm", "hrbm"), settings=(10,), other_count=500, overrides=None, test_size=1000, progress=None):
    """Rare-class sweep: each digit in turn keeps only ``rare`` training examples.

    ``rare_error`` is the error on the rare digit's test examples; rows with
    setting ``rare=R`` per digit are followed by their average over digits.
    """
    tree = load_tree("mnist")
    per_digit = []
    for seed in seeds:
        pool, test = _mnist(test_size, seed)
        for rare in settings:
            for digit in range(pool.K):
                train = rare_class_sample(pool, digit, int(rare), other_count, seed=seed)
                for v in variants:
                    cfg = variant_config(v, MNIST_CONFIG, seed, overrides or {}, MNIST_HHRBM_WIDTHS)
                    row = run_one(v, train, test, tree, cfg, rare_class=digit)
                    row.protocol, row.setting = "fig4b", f"rare={int(rare)}/digit={digit}"
                    per_digit.append(row)
                    if progress:
                        progress(row)
    averaged = []
    groups: dict[tuple, list[ResultRow]] = {}
    for r in per_digit:
        groups.setdefault((r.setting.split("/")[0], r.variant, r.seed), []).append(r)
    for (setting, v, seed), group in groups.items():
        averaged.append(ResultRow("fig4b", setting, v, seed,
                                  float(np.mean([r.test_error for r in group])),
                                  float(np.mean([r.rare_error for r in group]))))
    return per_digit + averaged + mean_rows(averaged, over="seed")


def table2(seeds, variants=("hrbm",), settings=(0.0, 0.1), desk_scale=False, overrides=None, progress=None):
    """20 Newsgroups; ``settings`` are the penalty weights tried for the hierarchical model."""
    tree = load_tree("20ng")
    train, test = load_dataset("20ng"), load_dataset("20ng-test")
    train.K = test.K = tree.num_classes
    rows = []
    for seed in seeds:
        for v in variants:
            base = dict(NG_CONFIG if v == "hrbm" else NG_BASELINE_CONFIG)
            if v in ("mnl", "corrmnl"):
                base["lr"] = 0.01
            if desk_scale:
                base.update(NG_DESK)
            widths = NG_HHRBM_WIDTHS if not desk_scale else tuple(max(w // 5, 20) for w in NG_HHRBM_WIDTHS)
            for C in (settings if v == "hrbm" else (base.get("C", 0.0),)):
                cfg = variant_config(v, dict(base, C=float(C)), seed, overrides or {}, widths)
                row = run_one(v, train, test, tree, cfg)
                row.protocol, row.setting = "table2", f"C={float(C):g}" if v == "hrbm" else "-"
                rows.append(row)
                if progress:
                    progress(row)
    return rows + mean_rows(rows, over="seed")


PROTOCOLS = {"table1": table1, "fig4a": fig4a, "fig4b": fig4b, "table2": table2}
