"""Command-line front end.

Subcommands::

    swboost train    --data D [--loss exp|log] [--rounds N] ... --out model.json [--trace t.csv]
    swboost predict  --model model.json --data D [--out pred.csv]
    swboost evaluate --model model.json --data D
    swboost sweep    --data D --sweep nu|eta|kappa --values 0,1e-9,1e-4 --repeats R --out s.csv
    swboost bench    --data D --rounds N --out timing.csv
    swboost path     --data D --pool 8 [--compare-l1 --grid 20] --out path.csv

Summaries are printed to standard output as a single JSON document; tables go
to CSV files. Exit status is 0 on success, 1 for bad input (unreadable files,
malformed data, invalid flags) and 2 when a solver or other internal step
fails.
"""

from __future__ import annotations

import argparse
import csv
import json
import math
import sys
from pathlib import Path

import numpy as np

from . import __version__
from .booster import ModelFormatError, TrainConfig, load_model, save_model, train
from .boxsolver import SolverError
from .dataio import DataFormatError, SplitSpec, cap_per_class, load_dataset, stratified_split
from .experiments import FC_VARIABLE_CAP, compare_path, run_bench, run_sweep, stump_pool, summarize
from .oracles import OracleError, epsilon_path

EXIT_OK = 0
EXIT_USER = 1
EXIT_INTERNAL = 2
MAX_POOL = 32


class UsageError(Exception):
    """Invalid combination of flags detected after parsing."""


def _float_list(text: str) -> list[float]:
    try:
        values = [float(v) for v in text.split(",") if v.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated numbers, got {text!r}")
    if not values:
        raise argparse.ArgumentTypeError("the value list is empty")
    return values


def _guess_format(path: str, fmt: str | None) -> str:
    if fmt:
        return fmt
    return "csv" if Path(path).suffix.lower() == ".csv" else "libsvm"


def _load(args):
    return load_dataset(args.data, _guess_format(args.data, args.format), args.label_col)


def _config(args) -> TrainConfig:
    return TrainConfig(loss=args.loss, nu=args.nu, eta=args.eta, kappa=args.kappa,
                       max_rounds=args.rounds, stop_slack=args.eps, seed=args.seed)


def _emit(obj) -> None:
    json.dump(obj, sys.stdout, indent=1, allow_nan=False)
    sys.stdout.write("\n")


def _none_if_nan(x):
    return None if x is None or (isinstance(x, float) and math.isnan(x)) else x


# -- commands ---------------------------------------------------------------

def cmd_train(args) -> int:
    data = _load(args)
    split = SplitSpec(args.train_frac, args.per_class, args.seed)
    train_set, test_set = stratified_split(data, split)
    model, trace = train(train_set, _config(args), eval_data=test_set if test_set.m else None)
    save_model(model, args.out)
    if args.trace:
        trace.to_csv(args.trace)
    test_error = model.error(test_set) if test_set.m else None
    _emit({
        "command": "train",
        "loss": model.loss,
        "rounds": model.n,
        "stop_reason": trace.stop_reason,
        "train_error": model.error(train_set),
        "test_error": test_error,
        "m_train": train_set.m,
        "m_test": test_set.m,
        "model": str(args.out),
        "trace": str(args.trace) if args.trace else None,
    })
    return EXIT_OK


def _model_and_data(args):
    model = load_model(args.model)
    data = _load(args)
    if model.d is not None and data.d > model.d:
        raise DataFormatError(f"{args.data}: {data.d} features, model expects {model.d}")
    X = data.features
    if model.d is not None and X.shape[1] < model.d:
        # Sparse files may omit trailing all-zero columns.
        X = np.pad(X, ((0, 0), (0, model.d - X.shape[1])))
    return model, data, X


def cmd_predict(args) -> int:
    model, _, X = _model_and_data(args)
    predicted = model.predict(X)
    classes = model.classes or tuple(range(1, model.k + 1))
    out = Path(args.out).open("w", newline="") if args.out else sys.stdout
    try:
        writer = csv.writer(out)
        writer.writerow(["index", "predicted"])
        for i, r in enumerate(predicted):
            writer.writerow([i, classes[r - 1]])
    finally:
        if args.out:
            out.close()
    return EXIT_OK


def cmd_evaluate(args) -> int:
    model, data, X = _model_and_data(args)
    classes = model.classes or tuple(range(1, model.k + 1))
    # Compare in original label values: the file's own 1..k remapping may differ.
    truth = np.array([data.classes[r - 1] for r in data.labels], dtype=np.float64)
    predicted = np.array([classes[r - 1] for r in model.predict(X)], dtype=np.float64)
    _emit({"command": "evaluate", "m": data.m, "error": float(np.mean(predicted != truth)),
           "rounds": model.n})
    return EXIT_OK


def cmd_sweep(args) -> int:
    data = _load(args)
    split = SplitSpec(args.train_frac, args.per_class, args.seed)
    rows = run_sweep(data, args.sweep, args.values, args.repeats, _config(args), split,
                     seed_base=args.seed)
    stats = summarize(rows)
    with Path(args.out).open("w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["param", "repeat", "seed", "test_error"])
        for row in rows:
            writer.writerow([repr(row.param), row.repeat, row.seed, repr(row.test_error)])
        for param, (mean, std) in stats.items():
            writer.writerow([repr(param), "mean", "", repr(mean)])
            writer.writerow([repr(param), "std", "", "" if math.isnan(std) else repr(std)])
    _emit({
        "command": "sweep",
        "param": args.sweep,
        "repeats": args.repeats,
        "summary": [{"value": p, "mean": m, "std": _none_if_nan(s)} for p, (m, s) in stats.items()],
        "out": str(args.out),
    })
    return EXIT_OK


def cmd_bench(args) -> int:
    data = cap_per_class(_load(args), args.per_class, args.seed)
    rows = run_bench(data, _config(args), args.rounds)
    with Path(args.out).open("w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["round", "stagewise_ms", "fullycorrective_ms"])
        for row in rows:
            fc = "" if row.fullycorrective_ms is None else f"{row.fullycorrective_ms:.6f}"
            writer.writerow([row.round, f"{row.stagewise_ms:.6f}", fc])
    timed = [r for r in rows if r.fullycorrective_ms is not None]
    sw = sum(r.stagewise_ms for r in timed)
    fc = sum(r.fullycorrective_ms for r in timed)
    skipped = len(rows) - len(timed)
    _emit({
        "command": "bench",
        "rounds": len(rows),
        "stagewise_total_ms": sum(r.stagewise_ms for r in rows),
        "fullycorrective_total_ms": fc,
        "ratio": fc / sw if timed and sw > 0 else None,
        "fullycorrective_skipped": skipped,
        "note": (f"fully-corrective solve skipped for {skipped} rounds with t*k > {FC_VARIABLE_CAP}"
                 if skipped else None),
        "out": str(args.out),
    })
    return EXIT_OK


def cmd_path(args) -> int:
    if not 1 <= args.pool <= MAX_POOL:
        raise UsageError(f"--pool must be between 1 and {MAX_POOL}")
    if args.steps < 1 or args.step <= 0:
        raise UsageError("--steps must be >= 1 and --step positive")
    data = cap_per_class(_load(args), args.per_class, args.seed)
    pool = stump_pool(data, args.pool, args.loss)
    trace = epsilon_path(data, pool, args.step, args.steps, args.loss)
    trace.to_csv(args.out)
    summary = {"command": "path", "steps": args.steps, "pool": len(pool),
               "final_l1_norm": float(trace.l1_norms[-1]), "out": str(args.out),
               "comparison": None}
    if args.compare_l1:
        if args.grid < 1:
            raise UsageError("--grid must be >= 1")
        comparison = compare_path(data, trace, args.loss, args.grid)
        companion = Path(args.out).with_name(Path(args.out).stem + "_l1.csv")
        n = len(pool) * data.k
        with companion.open("w", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow(["step", "gamma", "max_gap"] + [f"w_{j}" for j in range(1, n + 1)])
            for c in comparison:
                writer.writerow([c.step, repr(c.gamma), repr(c.max_gap)]
                                + [repr(float(w)) for w in c.coefficients.ravel()])
        summary["comparison"] = {
            "out": str(companion),
            "grid": len(comparison),
            "max_gap": max(c.max_gap for c in comparison),
            "max_gap_over_gamma": max(c.max_gap / c.gamma for c in comparison),
        }
    _emit(summary)
    return EXIT_OK


# -- argument parsing -------------------------------------------------------

def _add_data(p, required=True):
    p.add_argument("--data", required=required, help="dataset file (libsvm or csv)")
    p.add_argument("--format", choices=("libsvm", "csv"), default=None,
                   help="input format (default: from the file extension)")
    p.add_argument("--label-col", type=int, default=-1, help="label column for csv input")


def _add_training(p, rounds=500):
    p.add_argument("--loss", choices=("exp", "log"), default="exp")
    p.add_argument("--rounds", type=int, default=rounds)
    p.add_argument("--nu", type=float, default=1e-9, help="l1 regularization weight")
    p.add_argument("--eta", type=float, default=0.5, help="shrinkage factor in (0, 1]")
    p.add_argument("--kappa", type=float, default=None, help="cap on each coefficient")
    p.add_argument("--eps", type=float, default=1e-7, help="slack in the stopping rule")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--per-class", type=int, default=None, help="cap on samples per class")
    p.add_argument("--train-frac", type=float, default=0.75)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="swboost",
                                     description="Stage-wise multi-class boosting with stumps.")
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("train", help="train a model and write it as JSON")
    _add_data(p)
    _add_training(p)
    p.add_argument("--out", required=True, help="model JSON path")
    p.add_argument("--trace", default=None, help="per-round trace CSV path")
    p.set_defaults(func=cmd_train)

    for name, func, text in (("predict", cmd_predict, "predict classes for a dataset"),
                             ("evaluate", cmd_evaluate, "report the error rate on a dataset")):
        p = sub.add_parser(name, help=text)
        p.add_argument("--model", required=True)
        _add_data(p)
        if name == "predict":
            p.add_argument("--out", default=None, help="CSV path (default: standard output)")
        p.set_defaults(func=func)

    p = sub.add_parser("sweep", help="repeated split/train/test over parameter values")
    _add_data(p)
    _add_training(p)
    p.add_argument("--sweep", choices=("nu", "eta", "kappa"), default="nu")
    p.add_argument("--values", type=_float_list, required=True, help="comma-separated values")
    p.add_argument("--repeats", type=int, default=20)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_sweep)

    p = sub.add_parser("bench", help="coefficient-solve time, stage-wise vs fully-corrective")
    _add_data(p)
    _add_training(p, rounds=200)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_bench)

    p = sub.add_parser("path", help="epsilon-step coefficient path over a small stump pool")
    _add_data(p)
    _add_training(p)
    p.add_argument("--pool", type=int, default=8, help=f"pool size (at most {MAX_POOL})")
    p.add_argument("--step", type=float, default=0.01)
    p.add_argument("--steps", type=int, default=1000)
    p.add_argument("--compare-l1", action="store_true",
                   help="also solve the l1-constrained problem at matched norms")
    p.add_argument("--grid", type=int, default=20)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_path)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    if getattr(args, "repeats", 1) < 1:
        parser.error("--repeats must be >= 1")
    try:
        return args.func(args)
    except FileNotFoundError as exc:
        detail = f"no such file: {exc.filename}" if exc.filename else str(exc)
        print(f"swboost: error: {detail}", file=sys.stderr)
        return EXIT_USER
    except (SolverError, OracleError) as exc:
        print(f"swboost: solver failure: {exc}", file=sys.stderr)
        return EXIT_INTERNAL
    except (UsageError, DataFormatError, ModelFormatError, ValueError, OSError) as exc:
        print(f"swboost: error: {exc}", file=sys.stderr)
        return EXIT_USER
    except Exception as exc:  # pragma: no cover - last-resort guard
        print(f"swboost: internal error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_INTERNAL


if __name__ == "__main__":
    sys.exit(main())
