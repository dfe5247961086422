"""Command-line entry point: ``airfl run | verify | solve-once``."""

import argparse
import logging
import os
import sys

import numpy as np

from airfl.airlink import gradient_statistics
from airfl.errors import AirflError
from airfl.expcli.config import load_config
from airfl.expcli.dataset import load_dataset
from airfl.expcli.experiment import build_scenario, run_experiment
from airfl.expcli.verify import SUITES, run_suite
from airfl.fltrain import local_gradient, round_channels
from airfl.optimizer import alternating_optimize

OUTPUT_ENV = "AIRFL_OUTPUT_DIR"
log = logging.getLogger("airfl")


def _cmd_run(args):
    cfg = load_config(args.config)
    out = args.output_dir or os.environ.get(OUTPUT_ENV) or cfg.output_dir
    result = run_experiment(cfg, output_dir=out)
    print(f"wrote {len(result.traces)} traces and summary.csv to {result.output_dir}")
    return result.exit_status


def _cmd_verify(args):
    return run_suite(args.suite)


def _cmd_solve_once(args):
    """One AO solve on the round-1 channel and gradients of one seed."""
    cfg = load_config(args.config)
    data = load_dataset(cfg.dataset)
    sc = build_scenario(cfg, data, args.seed)
    grads = np.array([local_gradient(sc.model, s) for s in sc.shards])
    stats, _ = gradient_statistics(grads, sc.sizes)
    ch = round_channels(sc, args.seed, 1)
    res = alternating_optimize(
        ch, args.mode, stats, sc.p_node, sc.p_ris, sc.noise, cfg.ao, rng=np.random.default_rng([args.seed, 1, 1])
    )
    scale = float(stats.total_size) ** 2
    for it, mse in enumerate(res.mse_trace, 1):
        print(f"iter {it:3d}  mse {mse:.6e}  per-entry {mse / scale:.6e}")
    print(f"mode={res.mode.value} iters={res.iters_used} feasible={res.feasible} inner_passes={res.inner_passes}")
    return 0 if res.feasible else 1


def build_parser():
    parser = argparse.ArgumentParser(prog="airfl", description=__doc__)
    parser.add_argument("-v", "--verbose", action="store_true", help="log progress and dB conversions")
    sub = parser.add_subparsers(dest="command", required=True)

    p_run = sub.add_parser("run", help="run every arm x seed and write CSV traces")
    p_run.add_argument("config")
    p_run.add_argument("--output-dir", default=None, help=f"overrides experiment.output_dir and ${OUTPUT_ENV}")
    p_run.set_defaults(func=_cmd_run)

    p_ver = sub.add_parser("verify", help="run an oracle battery")
    p_ver.add_argument("suite", choices=sorted(SUITES))
    p_ver.set_defaults(func=_cmd_verify)

    p_one = sub.add_parser("solve-once", help="single alternating-optimization solve, printing the MSE trace")
    p_one.add_argument("config")
    p_one.add_argument("--seed", type=int, default=0)
    p_one.add_argument("--mode", choices=["active", "passive", "none"], default="active")
    p_one.set_defaults(func=_cmd_solve_once)
    return parser


def main(argv=None):
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(name)s: %(message)s")
    try:
        return args.func(args)
    except (AirflError, OSError, ValueError) as exc:
        print(f"airfl {args.command}: error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
