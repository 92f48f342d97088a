"""Command-line interface: ``knncp run | predict | synthetic | report``.

Exit codes: 0 success, 1 runtime error, 2 usage or configuration error.
"""

from __future__ import annotations

import argparse
import csv
import json
import sys
from dataclasses import replace
from pathlib import Path

import numpy as np

from . import __version__
from .config import RunConfig, load_config, serialize_config
from .data import (
    RNG_ALGORITHM,
    Dataset,
    SplitPlan,
    SyntheticSpec,
    default_calibration_size,
    generate_synthetic,
    load_csv,
    normalize_minmax,
    save_csv,
)
from .errors import ConfigurationError, DataError
from .evaluation import format_table, read_report_csv, run_experiment, write_report_csv
from .icp import calibrate, predict_intervals, quantile_index
from .nonconformity import MeasureConfig
from .tcp import TransductiveRegressor

EXIT_OK, EXIT_RUNTIME, EXIT_USAGE = 0, 1, 2


class UsageError(Exception):
    pass


def _warn(msg: str) -> None:
    print(f"warning: {msg}", file=sys.stderr)


def _load_dataset(cfg: RunConfig) -> Dataset:
    if cfg.dataset == "synthetic":
        return generate_synthetic(cfg.synthetic)
    path = Path(cfg.dataset)
    if not path.is_file():
        raise UsageError(f"dataset file not found: {path}")
    try:
        return load_csv(path, cfg.label)
    except DataError as exc:
        raise UsageError(str(exc)) from None


def cmd_run(args) -> int:
    try:
        cfg = load_config(args.config) if args.config else RunConfig()
        cfg = cfg.with_overrides(
            dataset=args.dataset, out=args.out, seed=args.seed, k=args.k, q=args.q,
            folds=args.folds, runs=args.runs,
        )
        if args.deltas:
            cfg = replace(cfg, deltas=tuple(float(d) for d in args.deltas.split(",")))
        if args.measures:
            cfg = replace(cfg, measures=tuple(m.strip() for m in args.measures.split(",")))
        if args.method:
            cfg = replace(cfg, methods=tuple(m.strip() for m in args.method.split(",")))
        cfg.validate()
        dataset = _load_dataset(cfg)
        if cfg.normalize:
            dataset, _ = normalize_minmax(dataset)
        plan = SplitPlan(cfg.folds, cfg.runs, cfg.seed, cfg.q or 0)
        plan.check(len(dataset))
    except (ConfigurationError, DataError, UsageError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE

    try:
        report = run_experiment(
            dataset, methods=cfg.methods, kinds=cfg.measures, plan=plan, deltas=cfg.deltas,
            k=cfg.k, gamma=cfg.gamma, rho=cfg.rho, weighting=cfg.weighting, threads=args.threads,
        )
    except (ConfigurationError, DataError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except Exception as exc:  # noqa: BLE001 - report and exit nonzero
        print(f"error: experiment failed: {exc!r}", file=sys.stderr)
        return EXIT_RUNTIME

    out = Path(cfg.out)
    out.mkdir(parents=True, exist_ok=True)
    timing = not args.no_timing
    report.to_csv(out / "report.csv", include_timing=timing)
    write_report_csv([r for _, r in report.per_run], out / "report_per_run.csv", include_timing=False,
                     runs=[run for run, _ in report.per_run])
    (out / "report.txt").write_text(report.to_text(), encoding="utf-8")
    resolved = replace(cfg, k=report.k, q=report.q if report.q is not None else cfg.q)
    (out / "config.txt").write_text(serialize_config(resolved), encoding="utf-8")
    manifest = {
        "library": "knncp",
        "version": __version__,
        "rng": RNG_ALGORITHM,
        "seed": cfg.seed,
        "k": report.k,
        "q": report.q,
        "gamma": cfg.gamma,
        "rho": cfg.rho,
        "folds": cfg.folds,
        "runs": cfg.runs,
        "deltas": list(cfg.deltas),
        "config": serialize_config(resolved),
    }
    (out / "manifest.json").write_text(json.dumps(manifest, indent=2) + "\n", encoding="utf-8")
    for r in report.rows:
        if r.n_infinite:
            _warn(f"{r.method} {r.measure} delta={r.delta}: {r.n_infinite} infinite regions")
    print(report.to_text(), end="")
    return EXIT_OK


def _read_test_rows(path: Path, train: Dataset, label) -> np.ndarray:
    if not path.is_file():
        raise UsageError(f"test file not found: {path}")
    with path.open(newline="", encoding="utf-8") as fh:
        rows = [r for r in csv.reader(fh) if r and any(c.strip() for c in r)]
    if rows and any(_not_number(c) for c in rows[0]):
        header = [c.strip() for c in rows[0]]
        rows = rows[1:]
    else:
        header = None
    d = train.n_features
    if not rows:
        raise UsageError(f"{path}: no test rows")
    width = len(rows[0])
    if width == d + 1:
        if header is not None and isinstance(label, str) and label in header:
            col = header.index(label)
        else:
            col = int(label) % width
        rows = [[c for j, c in enumerate(r) if j != col] for r in rows]
    elif width != d:
        raise UsageError(f"{path}: expected {d} attribute columns, got {width}")
    try:
        return np.array(rows, dtype=float)
    except ValueError as exc:
        raise UsageError(f"{path}: {exc}") from None


def _not_number(cell: str) -> bool:
    try:
        float(cell)
    except ValueError:
        return True
    return False


def cmd_predict(args) -> int:
    try:
        train_path = Path(args.train)
        if not train_path.is_file():
            raise UsageError(f"training file not found: {train_path}")
        train = load_csv(train_path, args.label)
        X = _read_test_rows(Path(args.test), train, args.label)
        if not args.no_normalize:
            train, record = normalize_minmax(train)
            X = record.apply(X)
        cfg = MeasureConfig(args.measure, args.k, args.gamma, args.rho, args.weighting)
        if not 0 < args.delta < 1:
            raise ConfigurationError(f"delta must lie in (0, 1), got {args.delta}")
        if args.method == "tcp":
            model = TransductiveRegressor(train, cfg)
        else:
            q = args.q or default_calibration_size(len(train))
            icp_model = calibrate(train, q, cfg, seed=args.seed)
    except (ConfigurationError, DataError, UsageError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE

    try:
        if args.method == "tcp":
            for x in X:
                print(model.predict_region(x, args.delta).format())
        else:
            if quantile_index(args.delta, icp_model.q) == 0:
                _warn(
                    f"floor(delta*(q+1)) = 0 for delta={args.delta}, q={icp_model.q}: "
                    "regions are the whole real line"
                )
            lo, hi = predict_intervals(icp_model, X, args.delta)
            for a, b in zip(lo, hi):
                print(f"{float(a)!r},{float(b)!r}")
    except Exception as exc:  # noqa: BLE001
        print(f"error: prediction failed: {exc!r}", file=sys.stderr)
        return EXIT_RUNTIME
    return EXIT_OK


def cmd_synthetic(args) -> int:
    try:
        if args.spec:
            cfg = load_config(args.spec)
            spec = cfg.synthetic
            if spec is None:
                raise ConfigurationError("synthetic.n: spec file has no synthetic.* keys")
        else:
            spec = SyntheticSpec(
                n_examples=args.n, d=args.d, mean_fn=args.mean, std_fn=args.std,
                input_low=args.low, input_high=args.high, seed=args.seed,
            )
        if args.seed is not None and args.spec:
            spec = replace(spec, seed=args.seed)
        data = generate_synthetic(spec)
    except (ConfigurationError, DataError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    save_csv(data, args.out)
    return EXIT_OK


def cmd_report(args) -> int:
    path = Path(args.report)
    if not path.is_file():
        print(f"error: report file not found: {path}", file=sys.stderr)
        return EXIT_USAGE
    try:
        rows = read_report_csv(path)
    except (KeyError, ValueError) as exc:
        print(f"error: {path}: malformed report ({exc})", file=sys.stderr)
        return EXIT_USAGE
    print(format_table(rows), end="")
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="knncp", description="Conformal k-NN regression")
    parser.add_argument("--version", action="version", version=f"knncp {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    run = sub.add_parser("run", help="run the cross-validation experiment")
    run.add_argument("--config", help="key = value experiment file")
    run.add_argument("--dataset")
    run.add_argument("--out")
    run.add_argument("--threads", type=int, default=1)
    run.add_argument("--seed", type=int)
    run.add_argument("--k", type=int)
    run.add_argument("--q", type=int)
    run.add_argument("--folds", type=int)
    run.add_argument("--runs", type=int)
    run.add_argument("--deltas", help="comma separated significance levels")
    run.add_argument("--measures", help="comma separated measure names")
    run.add_argument("--method", help="tcp, icp or tcp,icp")
    run.add_argument("--no-timing", action="store_true", help="write zero wall times for byte-identical reports")
    run.set_defaults(func=cmd_run)

    pred = sub.add_parser("predict", help="predictive regions for new inputs")
    pred.add_argument("--train", required=True)
    pred.add_argument("--test", required=True, help="CSV of attribute rows (a label column is dropped)")
    pred.add_argument("--label", default="-1")
    pred.add_argument("--method", choices=("tcp", "icp"), default="icp")
    pred.add_argument("--measure", default="standard")
    pred.add_argument("--k", type=int, default=4)
    pred.add_argument("--gamma", type=float, default=0.5)
    pred.add_argument("--rho", type=float, default=0.5)
    pred.add_argument("--q", type=int, help="calibration size (ICP)")
    pred.add_argument("--delta", type=float, default=0.1)
    pred.add_argument("--seed", type=int, default=0)
    pred.add_argument("--weighting", default="inverse")
    pred.add_argument("--no-normalize", action="store_true")
    pred.set_defaults(func=cmd_predict)

    syn = sub.add_parser("synthetic", help="write a synthetic normal-model dataset")
    syn.add_argument("--spec", help="config file with synthetic.* keys")
    syn.add_argument("--n", type=int, default=1000)
    syn.add_argument("--d", type=int, default=5)
    syn.add_argument("--mean", default="sine")
    syn.add_argument("--std", default="linear_abs")
    syn.add_argument("--low", type=float, default=-10.0)
    syn.add_argument("--high", type=float, default=10.0)
    syn.add_argument("--seed", type=int)
    syn.add_argument("--out", required=True)
    syn.set_defaults(func=cmd_synthetic)

    rep = sub.add_parser("report", help="render a saved report CSV as a table")
    rep.add_argument("report")
    rep.set_defaults(func=cmd_report)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    if getattr(args, "command", None) == "synthetic" and args.seed is None and not args.spec:
        args.seed = 0
    return args.func(args)


if __name__ == "__main__":
    sys.exit(main())
