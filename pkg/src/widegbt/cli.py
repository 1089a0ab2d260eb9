"""Command-line interface.

Subcommands: ``train``, ``predict``, ``eval``, ``sweep``, ``tune`` and
``datasets``.  Reports are JSON; prediction output and sweep curves are CSV.
Exit code 0 on success, nonzero with a one-line reason otherwise.  The
``WB_THREADS`` environment variable caps search parallelism.
"""

from __future__ import annotations

import argparse
import csv
import json
import sys
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .beta import BETA_KINDS, BetaSpec
from .booster import (
    LOSS_FOR_TASK,
    BoostParams,
    load_model,
    predict,
    predict_labels,
    save_model,
    train,
)
from .dataset import TASKS, Dataset, SplitSpec, load_csv, load_libsvm
from .harness import (
    SearchSpace,
    budgeted_gb,
    percent_improvement,
    random_search,
    width_sweep,
)
from .metrics import MetricReport, error_rate, logloss, rmse
from .tree import TreeParams


@dataclass(frozen=True)
class KnownDataset:
    name: str
    task: str
    p: int
    d: int
    metric: str
    url: str


# Expected shapes of the public benchmark datasets; `datasets verify` checks a
# local file against these.  Files are never downloaded automatically.
KNOWN_DATASETS = (
    KnownDataset("mnist", "multiclass", 784, 10, "error_rate", "http://yann.lecun.com/exdb/mnist/"),
    KnownDataset("fashion_mnist", "multiclass", 784, 10, "error_rate", "https://github.com/zalandoresearch/fashion-mnist"),
    KnownDataset("titanic", "binary", 8, 1, "error_rate", "https://www.kaggle.com/c/titanic/data"),
    KnownDataset("digits", "multiclass", 64, 10, "error_rate", "https://archive.ics.uci.edu/dataset/80/optical+recognition+of+handwritten+digits"),
    KnownDataset("adult", "binary", 108, 1, "error_rate", "https://archive.ics.uci.edu/dataset/2/adult"),
    KnownDataset("forest_fires", "regression", 12, 1, "rmse", "https://archive.ics.uci.edu/dataset/162/forest+fires"),
)


def _load_any(path: str, task: str, label: str, has_header: bool, fmt: str) -> Dataset:
    if fmt == "auto":
        fmt = "libsvm" if Path(path).suffix in (".libsvm", ".svm", ".svmlight") else "csv"
    if fmt == "libsvm":
        return load_libsvm(path, task)
    label_spec: str | int
    try:
        label_spec = int(label)
    except ValueError:
        label_spec = label
    return load_csv(path, label_spec, task, has_header=has_header)


def _add_data_args(p: argparse.ArgumentParser, with_task: bool = True) -> None:
    p.add_argument("--data", required=True, help="path to a CSV or LibSVM file")
    if with_task:
        p.add_argument("--task", required=True, choices=TASKS)
    p.add_argument("--label", default="-1", help="label column name or index (default: last)")
    p.add_argument("--no-header", action="store_true", help="CSV file has no header row")
    p.add_argument("--format", default="auto", choices=("auto", "csv", "libsvm"))


def _add_split_args(p: argparse.ArgumentParser) -> None:
    p.add_argument("--test-fraction", type=float, default=0.2)
    p.add_argument("--split-seed", type=int, default=0)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="widegbt",
        description="Gradient boosted trees with a widened output mapped into label space.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p_train = sub.add_parser("train", help="train a model and write it to a JSON file")
    _add_data_args(p_train)
    p_train.add_argument("--loss", default=None, help="loss kind (default: inferred from task)")
    p_train.add_argument("--q", type=int, default=None, help="output width (default: label dimension)")
    p_train.add_argument("--beta-kind", default="I", choices=BETA_KINDS)
    p_train.add_argument("--beta-seed", type=int, default=0)
    p_train.add_argument("--rounds", type=int, default=100)
    p_train.add_argument("--eta", type=float, default=0.1)
    p_train.add_argument("--max-depth", type=int, default=6)
    p_train.add_argument("--lambda", dest="reg_lambda", type=float, default=1.0)
    p_train.add_argument("--gamma", type=float, default=0.0)
    p_train.add_argument("--min-child-weight", type=float, default=1.0)
    p_train.add_argument("--min-samples-leaf", type=int, default=1)
    p_train.add_argument("--base-score", type=float, default=0.0)
    p_train.add_argument("--eval-data", default=None, help="optional held-out file for a per-round trace")
    p_train.add_argument("--model", required=True, help="output model path")

    p_pred = sub.add_parser("predict", help="score a file with a trained model")
    p_pred.add_argument("--model", required=True)
    p_pred.add_argument("--data", required=True)
    p_pred.add_argument("--label", default=None, help="label column to drop (default: last)")
    p_pred.add_argument("--no-header", action="store_true")
    p_pred.add_argument("--format", default="auto", choices=("auto", "csv", "libsvm"))
    p_pred.add_argument("--labels", action="store_true", help="write hard labels instead of raw scores")
    p_pred.add_argument("--out", required=True, help="output CSV path")

    p_eval = sub.add_parser("eval", help="evaluate a trained model on a labeled file")
    p_eval.add_argument("--model", required=True)
    p_eval.add_argument("--data", required=True)
    p_eval.add_argument("--label", default="-1")
    p_eval.add_argument("--no-header", action="store_true")
    p_eval.add_argument("--format", default="auto", choices=("auto", "csv", "libsvm"))
    p_eval.add_argument("--metric", default=None, choices=("error", "rmse", "logloss"))

    p_sweep = sub.add_parser("sweep", help="train once per output width and record error curves")
    _add_data_args(p_sweep)
    _add_split_args(p_sweep)
    p_sweep.add_argument("--widths", required=True, help="comma-separated list of widths, e.g. 7,8,9,10,20")
    p_sweep.add_argument("--rounds", type=int, default=100)
    p_sweep.add_argument("--eta", type=float, default=0.1)
    p_sweep.add_argument("--max-depth", type=int, default=2)
    p_sweep.add_argument("--lambda", dest="reg_lambda", type=float, default=1.0)
    p_sweep.add_argument("--gamma", type=float, default=0.0)
    p_sweep.add_argument("--beta-kind", default="I", choices=BETA_KINDS, help="matrix kind used where q >= d")
    p_sweep.add_argument("--beta-seed", type=int, default=0)
    p_sweep.add_argument("--out", required=True, help="output JSON report path")
    p_sweep.add_argument("--csv", default=None, help="also write the curves as long-format CSV")

    p_tune = sub.add_parser("tune", help="random hyperparameter search")
    _add_data_args(p_tune)
    _add_split_args(p_tune)
    p_tune.add_argument("--mode", required=True, choices=("wb", "gb", "budgeted"))
    p_tune.add_argument("--trials", type=int, default=30)
    p_tune.add_argument("--seed", type=int, default=0)
    p_tune.add_argument("--rounds", type=int, default=100)
    p_tune.add_argument("--q-factor", type=int, default=3)
    p_tune.add_argument("--objective", default=None, choices=("error_rate", "rmse", "logloss"),
                        help="tuning objective (default: the task's comparison metric)")
    p_tune.add_argument("--baseline", default=None,
                        help="existing report JSON to compute %% improvement against")
    p_tune.add_argument("--out", required=True, help="output JSON report path")

    p_ds = sub.add_parser("datasets", help="list expected benchmark datasets or verify a local file")
    ds_sub = p_ds.add_subparsers(dest="ds_command", required=True)
    ds_sub.add_parser("list", help="print each dataset's expected shape and source URL")
    p_verify = ds_sub.add_parser("verify", help="check a local file against the expected shape")
    p_verify.add_argument("--name", required=True, choices=[k.name for k in KNOWN_DATASETS])
    p_verify.add_argument("--data", required=True)
    p_verify.add_argument("--label", default="-1")
    p_verify.add_argument("--no-header", action="store_true")
    p_verify.add_argument("--format", default="auto", choices=("auto", "csv", "libsvm"))
    return parser


def _cmd_train(args: argparse.Namespace) -> int:
    data = _load_any(args.data, args.task, args.label, not args.no_header, args.format)
    loss = args.loss or LOSS_FOR_TASK[args.task]
    q = args.q if args.q is not None else data.d
    params = BoostParams(
        rounds=args.rounds,
        learning_rate=args.eta,
        tree=TreeParams(
            max_depth=args.max_depth,
            min_child_weight=args.min_child_weight,
            reg_lambda=args.reg_lambda,
            gamma=args.gamma,
            min_samples_leaf=args.min_samples_leaf,
        ),
        beta=BetaSpec(args.beta_kind, q, data.d, args.beta_seed),
        loss_kind=loss,
        base_score=args.base_score,
    )
    eval_data = (
        _load_any(args.eval_data, args.task, args.label, not args.no_header, args.format)
        if args.eval_data
        else None
    )
    model, trace = train(data, params, eval_data=eval_data)
    save_model(model, args.model)
    print(f"trained {model.rounds} rounds x {model.q} trees -> {args.model}")
    print(f"final train loss {trace.train_loss[-1]:.6g}")
    if trace.test_metric:
        print(f"final eval {trace.metric_kind} {trace.test_metric[-1]:.6g}")
    return 0


def _cmd_predict(args: argparse.Namespace) -> int:
    model = load_model(args.model)
    label = args.label if args.label is not None else "-1"
    data = _load_any(args.data, model.task, label, not args.no_header, args.format)
    if args.labels:
        out = predict_labels(model, data.features).reshape(-1, 1)
    else:
        out = predict(model, data.features)
    with open(args.out, "w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh)
        for row in out:
            writer.writerow([repr(float(v)) if not args.labels else int(v) for v in np.atleast_1d(row)])
    print(f"wrote {out.shape[0]} predictions -> {args.out}")
    return 0


def _cmd_eval(args: argparse.Namespace) -> int:
    model = load_model(args.model)
    data = _load_any(args.data, model.task, args.label, not args.no_header, args.format)
    metric = args.metric or ("rmse" if model.task == "regression" else "error")
    scores = predict(model, data.features)
    if metric == "error":
        value = error_rate(predict_labels(model, data.features), data.label_indices())
        kind = "error_rate"
    elif metric == "rmse":
        value = rmse(scores[:, 0], data.labels[:, 0])
        kind = "rmse"
    else:
        value = logloss(scores, data.labels, model.task)
        kind = "logloss"
    print(MetricReport(metric_kind=kind, value=value, n_eval=data.n).line())
    return 0


def _cmd_sweep(args: argparse.Namespace) -> int:
    data = _load_any(args.data, args.task, args.label, not args.no_header, args.format)
    widths = [int(w) for w in args.widths.split(",") if w.strip()]
    fixed = BoostParams(
        rounds=args.rounds,
        learning_rate=args.eta,
        tree=TreeParams(max_depth=args.max_depth, reg_lambda=args.reg_lambda, gamma=args.gamma),
        beta=BetaSpec(args.beta_kind, max(widths + [data.d]), data.d, args.beta_seed),
        loss_kind=LOSS_FOR_TASK[args.task],
    )
    traces = width_sweep(
        data, widths, fixed, split=SplitSpec(args.test_fraction, args.split_seed)
    )
    report = {
        "dataset": Path(args.data).stem,
        "mode": "sweep",
        "rounds": args.rounds,
        "params": {
            "eta": args.eta,
            "max_depth": args.max_depth,
            "reg_lambda": args.reg_lambda,
            "gamma": args.gamma,
            "beta_kind": args.beta_kind,
            "beta_seed": args.beta_seed,
        },
        "widths": widths,
        "curves": {str(q): traces[q].test_metric for q in widths},
        "final": {str(q): traces[q].test_metric[-1] for q in widths},
    }
    with open(args.out, "w", encoding="utf-8") as fh:
        json.dump(report, fh, indent=2)
    if args.csv:
        with open(args.csv, "w", encoding="utf-8", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow(["q", "round", "test_metric"])
            for q in widths:
                for r, v in enumerate(traces[q].test_metric):
                    writer.writerow([q, r, repr(v)])
    for q in widths:
        print(f"q={q} final test metric {traces[q].test_metric[-1]:.6g}")
    print(f"wrote report -> {args.out}")
    return 0


def _cmd_tune(args: argparse.Namespace) -> int:
    data = _load_any(args.data, args.task, args.label, not args.no_header, args.format)
    name = Path(args.data).stem
    space = SearchSpace(rounds=args.rounds, q_factor=args.q_factor)
    split = SplitSpec(args.test_fraction, args.split_seed)
    if args.mode in ("wb", "gb"):
        report = random_search(
            data, space, args.trials, args.seed, mode=args.mode,
            split=split, objective=args.objective, dataset_name=name,
        )
        if args.baseline:
            with open(args.baseline, "r", encoding="utf-8") as fh:
                baseline = json.load(fh)
            base_best = baseline.get("best", {}).get("best_metric")
            if base_best and report.best is not None:
                report.pct_improvement = percent_improvement(
                    report.best.best_metric, float(base_best)
                )
        doc = report.to_dict()
    else:
        wb_report = random_search(
            data, space, args.trials, args.seed, mode="wb",
            split=split, objective=args.objective, dataset_name=name,
        )
        assert wb_report.best is not None
        gb_report = budgeted_gb(
            data, wb_report.best, space, args.trials, args.seed,
            split=split, objective=args.objective, dataset_name=name,
        )
        doc = gb_report.to_dict()
        doc["wb_best"] = wb_report.to_dict()["best"]
    with open(args.out, "w", encoding="utf-8") as fh:
        json.dump(doc, fh, indent=2)
    best = doc["best"]
    print(f"mode {doc['mode']}: best metric {best['best_metric']:.6g} "
          f"(q={best['config']['q']}, kind={best['config']['beta_kind']}, "
          f"trees={best['tree_count']})")
    if doc.get("pct_improvement") is not None:
        print(f"improvement vs baseline: {doc['pct_improvement']:.3g}%")
    print(f"wrote report -> {args.out}")
    return 0


def _cmd_datasets(args: argparse.Namespace) -> int:
    if args.ds_command == "list":
        for k in KNOWN_DATASETS:
            print(f"{k.name}: task={k.task} p={k.p} d={k.d} metric={k.metric}")
            print(f"  source: {k.url}")
        return 0
    entry = next(k for k in KNOWN_DATASETS if k.name == args.name)
    data = _load_any(args.data, entry.task, args.label, not args.no_header, args.format)
    problems = []
    if data.p != entry.p:
        problems.append(f"expected p={entry.p}, file has p={data.p}")
    if data.d != entry.d:
        problems.append(f"expected d={entry.d}, file has d={data.d}")
    if problems:
        raise SystemExit(f"{args.data}: does not match {entry.name}: " + "; ".join(problems))
    print(f"{args.data}: matches {entry.name} (n={data.n}, p={data.p}, d={data.d})")
    print(f"source: {entry.url}")
    return 0


_COMMANDS = {
    "train": _cmd_train,
    "predict": _cmd_predict,
    "eval": _cmd_eval,
    "sweep": _cmd_sweep,
    "tune": _cmd_tune,
    "datasets": _cmd_datasets,
}


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return _COMMANDS[args.command](args)
    except SystemExit:
        raise
    except (ValueError, OSError, RuntimeError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


def entrypoint() -> None:
    sys.exit(main())


if __name__ == "__main__":
    entrypoint()
