"""Command-line interface: ``hrbm {train,eval,gradcheck,experiment}``."""
from __future__ import annotations

import argparse
import csv
import io
import json
import logging
import sys
import time
import warnings
from pathlib import Path

import numpy as np

from . import experiments
from .checkpoint import CheckpointError
from .config import HIERARCHICAL, PENALTY_MODES, VARIANTS, TrainConfig
from .datasets import DataFormatError, load_dataset
from .gradcheck import run_gradcheck
from .hier import TrainingError
from .models import input_dim, load_model, num_classes, predict_with, train_variant
from .taxonomy import TaxonomyError, load_tree

log = logging.getLogger("hrbm")


class UsageError(ValueError):
    pass


def _int_list(text: str) -> list[int]:
    return [int(t) for t in text.split(",") if t.strip()]


def _float_list(text: str) -> list[float]:
    return [float(t) for t in text.split(",") if t.strip()]


def _add_data_flags(p, test_only=False):
    if not test_only:
        p.add_argument("--data", help="training data file or dataset name (mnist, 20ng)")
        p.add_argument("--labels", help="IDX labels file for --data")
    p.add_argument("--test-data", help="test data file or dataset name (mnist-test, 20ng-test)")
    p.add_argument("--test-labels", help="IDX labels file for --test-data")
    p.add_argument("--format", choices=("idx", "table"))


def _add_model_flags(p):
    p.add_argument("--variant", choices=VARIANTS, default="hrbm")
    p.add_argument("--tree", help="taxonomy file (or bundled name: mnist.tree, 20ng.tree, five_class.tree)")
    p.add_argument("--hidden", default="100", help="hidden units; comma list of per-level widths for hhrbm")
    p.add_argument("--lr", type=float, default=0.1)
    p.add_argument("--C", type=float, default=0.1)
    p.add_argument("--penalty", choices=PENALTY_MODES, default="abs")
    p.add_argument("--paper-partial-grad", action="store_true", help="one-sided (child-only) penalty gradient")
    p.add_argument("--epochs", type=int, default=100)
    p.add_argument("--batch-size", type=int, default=100)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="hrbm", description=__doc__)
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("train", help="train one model")
    _add_data_flags(p)
    _add_model_flags(p)
    p.add_argument("--seed", type=int, default=1)
    p.add_argument("--model-out", default="model.ckpt")
    p.add_argument("--metrics-out", default="metrics.json")

    p = sub.add_parser("eval", help="evaluate a checkpoint")
    p.add_argument("checkpoint")
    _add_data_flags(p, test_only=True)
    p.add_argument("--metrics-out", help="JSON report; the confusion matrix goes to the same path with .csv")

    p = sub.add_parser("gradcheck", help="finite-difference gradient checks")
    p.add_argument("--dims", default="3,4,3", help="n,d,K (n, d <= 4)")
    p.add_argument("--seed", type=int, default=1)

    p = sub.add_parser("experiment", help="run an experiment protocol")
    p.add_argument("protocol")
    p.add_argument("--seeds", default="1,2,3")
    p.add_argument("--variants", help="comma list of variants (protocol default otherwise)")
    p.add_argument("--settings", help="comma list: train sizes (fig4a), rare counts (fig4b), C values (table2)")
    p.add_argument("--epochs", type=int, help="override the protocol's epoch count")
    p.add_argument("--desk-scale", action="store_true", help="20 Newsgroups at n=200, 50 epochs")
    p.add_argument("--metrics-out", help="write the result table (CSV) here")
    return parser


def _config_from(args) -> TrainConfig:
    widths = _int_list(args.hidden)
    if not widths:
        raise UsageError("--hidden is empty")
    if args.variant != "hhrbm" and len(widths) > 1:
        raise UsageError("a comma list for --hidden is only valid with --variant hhrbm")
    return TrainConfig(
        variant=args.variant, hidden=tuple(widths) if args.variant == "hhrbm" else widths[0],
        lr=args.lr, C=args.C, epochs=args.epochs, batch_size=args.batch_size, seed=args.seed,
        penalty=args.penalty, paper_partial_grad=args.paper_partial_grad,
        data=args.data, labels=args.labels, test_data=args.test_data, test_labels=args.test_labels,
        format=args.format, tree=args.tree, model_out=args.model_out, metrics_out=args.metrics_out,
    )


def _write_csv(path: Path, header, rows):
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    w.writerows(rows)
    path.write_text(buf.getvalue(), encoding="utf-8")


def _csv_path(path) -> Path:
    return Path(path).with_suffix(".csv")


def cmd_train(args) -> int:
    config = _config_from(args)
    if args.data is None:
        raise UsageError("--data is required")
    tree = None
    if config.variant in HIERARCHICAL:
        if args.tree is None:
            raise UsageError(f"--tree is required for --variant {config.variant}")
        tree = load_tree(args.tree)
    elif args.tree is not None:
        warnings.warn(f"--tree is ignored for --variant {config.variant}")
    data = load_dataset(args.data, args.labels, args.format)
    K = tree.num_classes if tree is not None else data.K
    test = None
    if args.test_data is not None:
        test = load_dataset(args.test_data, args.test_labels, args.format)
        if test.d != data.d:
            raise UsageError(f"test data has {test.d} features, training data {data.d}")

    start = time.perf_counter()
    trained = train_variant(data.X, data.y, K, config, tree)
    if test is not None:
        trained.metrics.test_error = float(np.mean(trained.predict(test.X) != test.y))
    trained.metrics.seconds = time.perf_counter() - start
    trained.save(args.model_out)

    metrics = trained.metrics.to_dict()
    Path(args.metrics_out).write_text(json.dumps(metrics, indent=2) + "\n", encoding="utf-8")
    _write_csv(
        _csv_path(args.metrics_out),
        ["epoch", "recon_error", "penalty", "train_error"],
        [[r["epoch"], "" if r["recon_error"] is None else repr(r["recon_error"]), repr(r["penalty"]), repr(r["train_error"])]
         for r in metrics["epochs"]],
    )
    summary = f"trained {config.variant} -> {args.model_out}"
    if test is not None:
        summary += f"; test error {trained.metrics.test_error:.4f}"
    print(summary)
    return 0


def evaluate(checkpoint, data) -> tuple[float, np.ndarray]:
    variant, model = load_model(checkpoint)
    dim = input_dim(model)
    if dim >= 0 and dim != data.d:
        raise UsageError(f"checkpoint expects {dim} features, test data has {data.d}")
    K = num_classes(model)
    if len(data.y) and data.y.max() >= K:
        raise UsageError(f"test labels exceed the model's {K} classes")
    pred = predict_with(variant, model, data.X)
    confusion = np.zeros((K, K), dtype=int)
    np.add.at(confusion, (data.y, pred), 1)
    return float(np.mean(pred != data.y)) if len(pred) else 0.0, confusion


def cmd_eval(args) -> int:
    if args.test_data is None:
        raise UsageError("--test-data is required")
    data = load_dataset(args.test_data, args.test_labels, args.format)
    error, confusion = evaluate(args.checkpoint, data)
    print(f"error_rate {error:.6f} ({int(confusion.sum() - np.trace(confusion))}/{int(confusion.sum())})")
    if args.metrics_out:
        report = {"checkpoint": str(args.checkpoint), "test_error": error, "confusion": confusion.tolist()}
        Path(args.metrics_out).write_text(json.dumps(report, indent=2) + "\n", encoding="utf-8")
        K = confusion.shape[0]
        _write_csv(_csv_path(args.metrics_out), ["true\\pred", *range(K)], [[k, *confusion[k]] for k in range(K)])
    return 0


def cmd_gradcheck(args) -> int:
    dims = _int_list(args.dims)
    if len(dims) != 3:
        raise UsageError("--dims expects n,d,K")
    report = run_gradcheck(*dims, seed=args.seed)
    for line in report.lines():
        print(line)
    print("PASS" if report.passed else f"FAIL: {', '.join(report.failed)}")
    return 0 if report.passed else 1


def cmd_experiment(args) -> int:
    if args.protocol not in experiments.PROTOCOLS:
        raise UsageError(f"unknown protocol {args.protocol!r}; available: {', '.join(experiments.PROTOCOLS)}")
    kwargs = {}
    if args.variants:
        kwargs["variants"] = tuple(v.strip() for v in args.variants.split(","))
        bad = [v for v in kwargs["variants"] if v not in VARIANTS]
        if bad:
            raise UsageError(f"unknown variants {bad}")
    if args.settings:
        kwargs["settings"] = tuple(_float_list(args.settings))
    if args.epochs is not None:
        kwargs["overrides"] = {"epochs": args.epochs}
    if args.protocol == "table2":
        kwargs["desk_scale"] = args.desk_scale
    elif args.desk_scale:
        warnings.warn("--desk-scale only applies to table2")
    rows = experiments.PROTOCOLS[args.protocol](
        _int_list(args.seeds), progress=lambda r: log.info("%s", ",".join(r.as_csv())), **kwargs
    )
    text = experiments.rows_to_csv(rows)
    if args.metrics_out:
        Path(args.metrics_out).write_text(text, encoding="utf-8")
    sys.stdout.write(text)
    return 0


COMMANDS = {"train": cmd_train, "eval": cmd_eval, "gradcheck": cmd_gradcheck, "experiment": cmd_experiment}


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(message)s")

    def show(message, *_args, **_kw):
        print(f"hrbm {args.command}: warning: {message}", file=sys.stderr)

    try:
        with warnings.catch_warnings():
            warnings.simplefilter("default")
            warnings.showwarning = show
            return COMMANDS[args.command](args)
    except (UsageError, ValueError, OSError, TaxonomyError, DataFormatError, CheckpointError, TrainingError) as exc:
        print(f"hrbm {args.command}: error: {exc}", file=sys.stderr)
        return 2 if isinstance(exc, UsageError) else 1


if __name__ == "__main__":
    sys.exit(main())
