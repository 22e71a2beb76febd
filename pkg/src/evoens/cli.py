"""``evoens`` command-line interface.

Subcommands::

    evoens split --config cfg.ini [--output-dir DIR]
    evoens run --config cfg.ini [--output-dir DIR]
    evoens report RUN_DIR
    evoens simulate-optimism --runs N --checkpoints Q --noise-scale S
                             [--trials T] [--seed K] [--true-losses CSV]
                             [--output FILE]
    evoens inspect-pool POOL.ckpt

Exit codes: 0 success, 1 configuration error (bad flags, bad config file,
infeasible split), 2 runtime failure.
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

import numpy as np

from .errors import ConfigError, EvoensError
from .runconfig import load_run_config
from .runner import cmd_report, cmd_run, cmd_split, inspect_pool_text, simulate_optimism_report

__all__ = ["main"]


class _Parser(argparse.ArgumentParser):
    def error(self, message: str):  # usage problems are configuration errors
        self.print_usage(sys.stderr)
        self.exit(1, f"{self.prog}: error: {message}\n")


def _build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="evoens", description=__doc__.split("\n\n")[0])
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    p_split = sub.add_parser("split", help="compute and write the train/test split")
    p_split.add_argument("--config", required=True, help="INI run configuration")
    p_split.add_argument("--output-dir", default=None, help="override [run] output_dir")

    p_run = sub.add_parser("run", help="run the configured benchmark")
    p_run.add_argument("--config", required=True, help="INI run configuration")
    p_run.add_argument("--output-dir", default=None, help="override [run] output_dir")
    p_run.add_argument(
        "--seed-override",
        default=None,
        help="comma-separated seeds replacing [run] seeds",
    )

    p_report = sub.add_parser("report", help="aggregate a run directory")
    p_report.add_argument("run_dir", help="directory produced by 'evoens run'")

    p_sim = sub.add_parser(
        "simulate-optimism", help="Monte-Carlo selection-optimism estimate"
    )
    p_sim.add_argument("--runs", type=int, required=True)
    p_sim.add_argument("--checkpoints", type=int, required=True)
    p_sim.add_argument("--noise-scale", type=float, required=True)
    p_sim.add_argument("--trials", type=int, default=100_000)
    p_sim.add_argument("--seed", type=int, default=0)
    p_sim.add_argument(
        "--true-losses", default=None, help="CSV of true losses, shape runs x checkpoints"
    )
    p_sim.add_argument("--output", default=None, help="write the result as JSON here")

    p_inspect = sub.add_parser("inspect-pool", help="describe a pool checkpoint")
    p_inspect.add_argument("path", help="checkpoint file")
    return parser


def _dispatch(args: argparse.Namespace) -> None:
    if args.command == "split":
        config = load_run_config(args.config, output_dir=args.output_dir)
        paths = cmd_split(config)
        print(f"split written: {paths['train_ids']}, {paths['test_ids']}")
        print(f"metadata: {paths['meta']}")
    elif args.command == "run":
        seed_override = None
        if args.seed_override is not None:
            try:
                seed_override = tuple(
                    int(s) for s in args.seed_override.split(",") if s.strip()
                )
            except ValueError as exc:
                raise ConfigError(f"bad --seed-override: {exc}") from exc
        config = load_run_config(
            args.config, output_dir=args.output_dir, seed_override=seed_override
        )
        report = cmd_run(config)
        print(f"report written: {report}")
    elif args.command == "report":
        summary = cmd_report(args.run_dir)
        print(summary.read_text(), end="")
        print(f"summary written: {summary}")
    elif args.command == "simulate-optimism":
        true_losses = None
        if args.true_losses is not None:
            try:
                true_losses = np.loadtxt(args.true_losses, delimiter=",", ndmin=2)
            except (OSError, ValueError) as exc:
                raise ConfigError(f"cannot read true losses: {exc}") from exc
        result = simulate_optimism_report(
            args.runs,
            args.checkpoints,
            args.noise_scale,
            trials=args.trials,
            seed=args.seed,
            true_losses=true_losses,
        )
        for key in ("candidates", "expected_min_observed", "optimism", "std_error"):
            print(f"{key}: {result[key]}")
        if args.output:
            Path(args.output).write_text(json.dumps(result, sort_keys=True, indent=2) + "\n")
            print(f"written: {args.output}")
    else:  # inspect-pool
        print(inspect_pool_text(args.path), end="")


def main(argv: list[str] | None = None) -> int:
    args = _build_parser().parse_args(argv)
    try:
        _dispatch(args)
    except ConfigError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except EvoensError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except KeyboardInterrupt:
        print("interrupted", file=sys.stderr)
        return 2
    return 0


if __name__ == "__main__":
    sys.exit(main())
