"""Command-line entry point: ``geogc {featurize,train,bho,report}``.

Settings come from built-in defaults, then an optional JSON ``--config``
file, then command-line flags (highest precedence).

Exit codes: 0 success, 1 usage error, 2 data error, 3 numeric failure.
"""
from __future__ import annotations

import argparse
import json
import logging
import sys
from pathlib import Path

from . import errors
from .experiment import (
    ExperimentConfig,
    featurize_stats,
    load_graphs,
    load_metrics,
    run_bho,
    run_train,
    write_report,
)

EXIT_OK, EXIT_USAGE, EXIT_DATA, EXIT_NUMERIC = 0, 1, 2, 3

log = logging.getLogger("geogc")


class UsageError(Exception):
    pass


def _floats(text):
    return [float(v) for v in text.split(",")]


def _ints(text):
    return [int(v) for v in text.split(",")]


def _add_common(p: argparse.ArgumentParser):
    p.add_argument("--config", help="JSON config file")
    p.add_argument("--dataset", help="JSONL/SDF path or synthetic:<n>:<seed>")
    p.add_argument("--format", choices=["jsonl", "sdf"])
    p.add_argument("--target-field", dest="target_field", help="SDF data field holding the target")
    p.add_argument("--output", "-o", help="output directory")
    p.add_argument("--seed", type=int, help="root seed")


def _add_training(p: argparse.ArgumentParser):
    p.add_argument("--mode", choices=["standard", "geometric-ref", "geometric-bho"])
    p.add_argument("--neighbor-order", dest="neighbor_order", type=int, choices=[1, 2, 3])
    p.add_argument("--params", type=_floats,
                   help="r0,n,r0_theta,n_theta,r0_phi,n_phi (default: 1.39/4.55 for all)")
    p.add_argument("--split-fractions", dest="split_fractions", type=_floats, help="train,val,test")
    p.add_argument("--split-counts", dest="split_counts", type=_ints, help="train,val,test")
    p.add_argument("--num-seeds", dest="num_seeds", type=int)
    p.add_argument("--seeds", type=_ints, help="explicit model seeds, comma separated")
    p.add_argument("--epochs", type=int)
    p.add_argument("--learning-rate", dest="learning_rate", type=float)
    p.add_argument("--hidden-dim", dest="hidden_dim", type=int)
    p.add_argument("--num-layers", dest="num_layers", type=int)
    p.add_argument("--readout", choices=["mean", "sum"])


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="geogc", description=__doc__.splitlines()[0])
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("featurize", help="write representation statistics")
    _add_common(p)

    p = sub.add_parser("train", help="train per mode and seed; write metrics and report")
    _add_common(p)
    _add_training(p)

    p = sub.add_parser("bho", help="tune power-law parameters by Bayesian optimization")
    _add_common(p)
    _add_training(p)
    p.add_argument("--trials", type=int, help="total trials (default 20; 40 for the full study)")

    p = sub.add_parser("report", help="comparison table over finished runs")
    p.add_argument("runs", nargs="+", help="run directories containing metrics.json")
    p.add_argument("--output", "-o", default=".", help="where report.txt/report.csv go")
    return parser


_NOT_CONFIG = {"config", "command", "verbose", "runs"}


def resolve_config(args: argparse.Namespace) -> ExperimentConfig:
    merged = {}
    if getattr(args, "config", None):
        try:
            merged.update(json.loads(Path(args.config).read_text()))
        except (OSError, json.JSONDecodeError) as exc:
            raise UsageError(f"cannot read config {args.config}: {exc}") from exc
    for key, value in vars(args).items():
        if key in _NOT_CONFIG or value is None:
            continue
        if key == "params":
            if len(value) != 6:
                raise UsageError("--params needs six comma-separated values")
            value = dict(zip(("r0", "n", "r0_theta", "n_theta", "r0_phi", "n_phi"), value))
        merged[key] = value
    if args.command == "bho":
        merged["mode"] = "geometric-bho"
    try:
        return ExperimentConfig.from_dict(merged)
    except (TypeError, ValueError) as exc:
        raise UsageError(str(exc)) from exc


def cmd_featurize(cfg: ExperimentConfig) -> dict:
    stats = featurize_stats(load_graphs(cfg))
    stats["config"] = cfg.to_dict()
    out = Path(cfg.output)
    out.mkdir(parents=True, exist_ok=True)
    (out / "featurize.json").write_text(json.dumps(stats, indent=2))
    t = stats["totals"]
    print(f"{stats['num_graphs']} graphs: U={t['U']} U_theta={t['U_theta']} U_phi={t['U_phi']}"
          f" -> {out / 'featurize.json'}")
    return stats


def cmd_train(cfg: ExperimentConfig) -> dict:
    if cfg.mode == "geometric-bho":
        raise UsageError("use the bho subcommand for geometric-bho runs")
    metrics = run_train(cfg)
    print((Path(cfg.output) / "report.txt").read_text(), end="")
    return metrics


def cmd_bho(cfg: ExperimentConfig) -> dict:
    summary = run_bho(cfg)
    best = ", ".join(f"{k}={v:.4f}" for k, v in summary["best_params"].items())
    print(f"best val RMSE {summary['best_val_rmse']:.4f} after {summary['trials']} trials: {best}")
    if summary["params_at_bounds"]:
        print(f"note: best point sits on the search-space boundary for {summary['params_at_bounds']}")
    return summary


def cmd_report(run_dirs, output) -> str:
    metrics = [load_metrics(d) for d in run_dirs]
    body = write_report(metrics, output)
    print(body, end="")
    return body


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_OK if exc.code == 0 else EXIT_USAGE
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        if args.command == "report":
            cmd_report(args.runs, args.output)
            return EXIT_OK
        cfg = resolve_config(args)
        {"featurize": cmd_featurize, "train": cmd_train, "bho": cmd_bho}[args.command](cfg)
        return EXIT_OK
    except UsageError as exc:
        print(f"usage error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (errors.NonFiniteLoss, errors.SingularKernel, ArithmeticError) as exc:
        print(f"numeric failure: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    except (errors.GeoGCError, OSError, ValueError, KeyError) as exc:
        print(f"data error: {exc}", file=sys.stderr)
        return EXIT_DATA


if __name__ == "__main__":
    sys.exit(main())
