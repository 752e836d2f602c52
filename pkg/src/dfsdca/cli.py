"""Command line front end: run experiments, verify bounds, summarize data.

Exit codes: 0 success, 1 usage or input error, 2 verification failure,
3 every seed of some grid cell diverged.
"""

from __future__ import annotations

import argparse
import json
import sys

from .data import ParseError
from .harness import (
    ExperimentConfig,
    dataset_summary,
    load_dataset,
    run_experiment,
    verify_mode,
)


class _Parser(argparse.ArgumentParser):
    """argparse exits with 2 on bad usage; keep 2 reserved for verify."""

    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(1, f"{self.prog}: error: {message}\n")


def _int_list(text: str) -> tuple:
    return tuple(int(tok) for tok in text.split(",") if tok)


def _str_list(text: str) -> tuple:
    return tuple(tok for tok in text.split(",") if tok)


def build_parser() -> _Parser:
    parser = _Parser(prog="dfsdca", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    run = sub.add_parser("run", help="run a solver grid and write trace/ratio files")
    run.add_argument("--config", help="JSON file holding a full experiment config")
    run.add_argument(
        "--data", help="LibSVM path or synthetic:<dist>:<n>:<d>:<omega>"
    )
    run.add_argument("--out", help="output directory")
    run.add_argument("--loss", default="logistic", choices=("logistic", "square"))
    run.add_argument("--lam", type=float, default=None)
    run.add_argument("--taus", type=_int_list, default=(1, 2, 4, 8, 16, 32))
    run.add_argument(
        "--variants",
        type=_str_list,
        default=("nice", "imp", "alt"),
        help="comma list from nice,imp,alt,unif",
    )
    run.add_argument(
        "--epochs",
        type=float,
        default=50.0,
        help="axis budget: every run does ceil(epochs*n) iterations",
    )
    run.add_argument(
        "--seeds", type=int, default=5, help="number of seeds (uses 0..N-1)"
    )
    run.add_argument("--gap", type=float, default=1e-10, help="target gap for ratios")
    run.add_argument("--data-seed", type=int, default=0)
    run.add_argument("--shuffle-seed", type=int, default=None)
    run.add_argument("--log-passes", type=float, default=0.1)
    run.add_argument("--stop-factor", type=float, default=1e-3)

    ver = sub.add_parser("verify", help="check all sampling bounds by enumeration")
    ver.add_argument("--data", required=True)
    ver.add_argument("--tau", type=int, required=True)
    ver.add_argument("--trials", type=int, default=100)
    ver.add_argument("--data-seed", type=int, default=0)
    ver.add_argument("--shuffle-seed", type=int, default=None)
    ver.add_argument("--lam", type=float, default=None)
    ver.add_argument("--loss", default="logistic", choices=("logistic", "square"))

    summ = sub.add_parser("summary", help="print size and conditioning of a dataset")
    summ.add_argument("--data", required=True)
    summ.add_argument("--data-seed", type=int, default=0)

    return parser


def _config_from_args(args) -> ExperimentConfig:
    if args.config:
        if args.data or args.out:
            raise ValueError("--config cannot be combined with --data/--out")
        with open(args.config, encoding="utf-8") as fh:
            return ExperimentConfig.from_json_dict(json.load(fh))
    if not args.data or not args.out:
        raise ValueError("run needs either --config or both --data and --out")
    return ExperimentConfig(
        data=args.data,
        out=args.out,
        loss=args.loss,
        lam=args.lam,
        taus=args.taus,
        variants=args.variants,
        epochs=args.epochs,
        seeds=tuple(range(args.seeds)),
        target_gap=args.gap,
        data_seed=args.data_seed,
        shuffle_seed=args.shuffle_seed,
        log_passes=args.log_passes,
        stop_factor=args.stop_factor,
    )


def _cmd_run(args) -> int:
    result = run_experiment(_config_from_args(args))
    print(f"dataset {result.label}: n={result.summary['n']} d={result.summary['d']}")
    for row in result.rows:
        emp = "n/a" if row.empirical_ratio is None else f"{row.empirical_ratio:.3f}"
        print(
            f"tau={row.tau:<3d} theta imp/nice={row.theoretical_ratio:8.3f} "
            f"empirical={emp:>8s}  [{row.status}]"
        )
    print(f"wrote {result.out_dir}/ratios.csv")
    if result.all_seeds_diverged:
        print("error: at least one grid cell diverged on every seed", file=sys.stderr)
        return 3
    return 0


def _cmd_verify(args) -> int:
    ok, lines = verify_mode(
        args.data,
        args.tau,
        data_seed=args.data_seed,
        shuffle_seed=args.shuffle_seed,
        trials=args.trials,
        lam=args.lam,
        loss_kind=args.loss,
    )
    for line in lines:
        print(line)
    print("verify:", "all checks passed" if ok else "FAILED")
    return 0 if ok else 2


def _cmd_summary(args) -> int:
    dataset, label = load_dataset(args.data, args.data_seed)
    info = dataset_summary(dataset)
    print(f"dataset {label}")
    for key in ("n", "d", "nnz", "sparsity", "max_over_mean", "digest"):
        print(f"  {key}: {info[key]}")
    return 0


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    try:
        if args.command == "run":
            return _cmd_run(args)
        if args.command == "verify":
            return _cmd_verify(args)
        return _cmd_summary(args)
    except (ParseError, ValueError, OSError) as exc:
        print(f"dfsdca: error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
