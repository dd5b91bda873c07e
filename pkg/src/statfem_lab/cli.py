"""Command line entry point: ``statfem-lab run`` and ``statfem-lab validate``."""

from __future__ import annotations

import argparse
import logging
import sys

import numpy as np

from .config import EXPERIMENTS, load_config
from .errors import ConfigError, StatfemError

EXIT_OK, EXIT_CONFIG, EXIT_NUMERIC = 0, 2, 3


def _parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="statfem-lab", description=__doc__)
    p.add_argument("-v", "--verbose", action="store_true", help="log progress to stderr")
    sub = p.add_subparsers(dest="command", required=True)
    run = sub.add_parser("run", help="run one experiment and write CSV results")
    run.add_argument("--config", required=True)
    run.add_argument("--experiment", choices=EXPERIMENTS)
    run.add_argument("--seed", type=int)
    run.add_argument("--out", help="output directory (overrides output_dir)")
    val = sub.add_parser("validate", help="check a config file without running it")
    val.add_argument("--config", required=True)
    return p


def _print_problems(err: ConfigError) -> None:
    for name, msg in err.problems:
        print(f"config error: {name}: {msg}", file=sys.stderr)


def _summary(result) -> str:
    lines = [f"{'epsilon':>10}  {'slope':>8}  {'intercept':>10}  {'final LR':>8}  {'#h':>4}"]
    for r in result.reports:
        eps = "-" if r.epsilon is None else f"{r.epsilon:.1e}"
        lr = "-" if r.final_smoothed_lr is None else f"{r.final_smoothed_lr:.4f}"
        lines.append(f"{eps:>10}  {r.slope:8.4f}  {r.intercept:10.4f}  {lr:>8}  {len(r.h_values):4d}")
    return "\n".join(lines)


def main(argv=None) -> int:
    args = _parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(message)s")
    overrides = {}
    if args.command == "run":
        overrides = {"experiment": args.experiment, "seed": args.seed, "output_dir": args.out}
    try:
        cfg = load_config(args.config, overrides)
    except ConfigError as err:
        _print_problems(err)
        return EXIT_CONFIG
    if args.command == "validate":
        print(f"{args.config}: ok ({cfg.experiment}, sha256 {cfg.config_hash()[:12]})")
        return EXIT_OK

    from .experiments import run_experiment

    try:
        result = run_experiment(cfg)
    except (StatfemError, np.linalg.LinAlgError) as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    except OSError as exc:
        print(f"i/o failure: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    print(f"{cfg.experiment} (seed {cfg.seed})")
    print(_summary(result))
    for kind, path in result.files.items():
        print(f"wrote {kind}: {path}")
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
