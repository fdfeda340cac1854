"""Command line entry point.

    bench <experiment> [--data <path|synthetic>] [--algo bear,mission,...]
          [--cf ...] [--eta ...] [--topk-grid ...] [--rows d] [--topk k]
          [--tau t] [--batch b] [--schedule constant|invt] [--eta0 v]
          [--t0 v] [--trials n] [--seed s] [--out results.csv] ...

Exit codes: 0 success, 2 configuration error, 3 data error.
"""

from __future__ import annotations

import argparse
import sys

from ..optim import ConfigError
from .experiments import (EXPERIMENTS, DataError, ExperimentConfig,
                          run_experiment)


def _floats(text: str) -> tuple[float, ...]:
    return tuple(float(tok) for tok in text.split(",") if tok)


def _ints(text: str) -> tuple[int, ...]:
    return tuple(int(tok) for tok in text.split(",") if tok)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="bench",
        description="Sketched feature-selection experiment runner "
                    "(CSV out; see README for column meanings).")
    parser.add_argument("experiment", choices=EXPERIMENTS)
    parser.add_argument("--data", default="synthetic",
                        help="'synthetic' or a VW-format text file")
    parser.add_argument("--test", dest="test_data", default="",
                        help="held-out VW file (classification sweeps)")
    parser.add_argument("--task", default="binary",
                        choices=("regression", "binary", "multiclass"))
    parser.add_argument("--algo", default="bear,mission",
                        help="comma list from bear,mission,sgd,olbfgs,fh")
    parser.add_argument("--cf", type=_floats, default=None,
                        help="compression factors p/m (comma list)")
    parser.add_argument("--eta", type=_floats, default=None,
                        help="step sizes for the step-size sweep")
    parser.add_argument("--topk-grid", type=_ints, default=None,
                        help="k grid for the top-k sweep")
    parser.add_argument("--rows", type=int, default=None,
                        help="sketch rows d (default 3 synthetic, 5 data)")
    parser.add_argument("--topk", type=int, default=None,
                        help="heap capacity (default: synthetic k, else 1000)")
    parser.add_argument("--tau", type=int, default=5)
    parser.add_argument("--batch", type=int, default=None,
                        help="minibatch size (default 8 synthetic, 1 data)")
    parser.add_argument("--schedule", default="constant",
                        choices=("constant", "invt"))
    parser.add_argument("--eta0", type=float, default=None,
                        help="step size (default 5e-4 synthetic, 0.5 data)")
    parser.add_argument("--t0", type=float, default=100.0)
    parser.add_argument("--trials", type=int, default=10)
    parser.add_argument("--seed", type=int, default=0)
    parser.add_argument("--out", default="",
                        help="CSV path (default: stdout)")
    parser.add_argument("--p", type=int, default=1000,
                        help="synthetic ambient dimension / gram-check p")
    parser.add_argument("--n", type=int, default=900)
    parser.add_argument("--k", type=int, default=8)
    parser.add_argument("--gram-m", type=int, default=400,
                        help="total sketch cells for the gram check")
    parser.add_argument("--limit", type=int, default=0,
                        help="cap on training examples read")
    parser.add_argument("--test-limit", type=int, default=0,
                        help="cap on test examples read")
    parser.add_argument("--metric", default="accuracy",
                        choices=("accuracy", "auc"))
    parser.add_argument("--grad-tol", type=float, default=1e-7)
    parser.add_argument("--epoch-cap", type=int, default=50,
                        help="synthetic step cap in epochs (cap = e*n/b)")
    parser.add_argument("--per-trial", action="store_true",
                        help="emit per-trial rows after each aggregate")
    parser.add_argument("--timing", action="store_true",
                        help="add wall_ms columns (breaks byte determinism)")
    parser.add_argument("--jobs", type=int, default=1,
                        help="parallel trial workers")
    return parser


def config_from_args(args: argparse.Namespace) -> ExperimentConfig:
    synthetic = args.data == "synthetic"
    defaults = ExperimentConfig.__dataclass_fields__
    kwargs = dict(
        experiment=args.experiment,
        algos=tuple(args.algo.split(",")),
        trials=args.trials,
        seed=args.seed,
        out=args.out,
        rows=args.rows if args.rows is not None else (3 if synthetic else 5),
        topk=(args.topk if args.topk is not None
              else (args.k if synthetic else 1000)),
        tau=args.tau,
        batch=(args.batch if args.batch is not None
               else (8 if synthetic else 1)),
        schedule=args.schedule,
        eta0=(args.eta0 if args.eta0 is not None
              else (5e-4 if synthetic else 0.5)),
        t0=args.t0,
        p=args.p, n=args.n, k=args.k,
        data=args.data, test_data=args.test_data, task=args.task,
        limit=args.limit, test_limit=args.test_limit, metric=args.metric,
        grad_tol=args.grad_tol, epoch_cap=args.epoch_cap,
        gram_m=args.gram_m,
        per_trial=args.per_trial, timing=args.timing, jobs=args.jobs,
    )
    if args.cf is not None:
        kwargs["cf_grid"] = args.cf
    if args.eta is not None:
        kwargs["eta_grid"] = args.eta
    if args.topk_grid is not None:
        kwargs["k_grid"] = args.topk_grid
    assert set(kwargs) <= set(defaults)
    return ExperimentConfig(**kwargs)


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        cfg = config_from_args(args)
        _, csv_text = run_experiment(cfg)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2
    except DataError as exc:
        print(f"data error: {exc}", file=sys.stderr)
        return 3
    if cfg.out:
        with open(cfg.out, "w", encoding="utf-8") as fp:
            fp.write(csv_text)
    else:
        sys.stdout.write(csv_text)
    return 0


if __name__ == "__main__":
    sys.exit(main())
