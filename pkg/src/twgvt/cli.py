"""``twgvt`` command line: run PHOLD experiments and write a CSV of metrics.

Exit status is 0 on success, 1 when a run hits a protocol fault or breaks GVT
safety or monotonicity, and 2 when the configuration is invalid.
"""

from __future__ import annotations

import argparse
import logging
import sys
from dataclasses import replace
from typing import List, Optional

from .harness import (ConfigError, RunConfig, RunFault, check_metrics, emit_csv,
                      run_experiment, write_csv)
from .phold import PholdConfig, load_config
from .queues import ProtocolFault

EXIT_OK, EXIT_FAULT, EXIT_CONFIG = 0, 1, 2

log = logging.getLogger("twgvt")


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="twgvt", description=__doc__.splitlines()[0])
    p.add_argument("--protocol", choices=("wf", "fh", "serial"), default="wf")
    p.add_argument("--workers", type=int, default=1)
    p.add_argument("--lps", type=int, default=None, help="number of LPs (overrides --config)")
    p.add_argument("--gvt-interval-ms", type=float, default=1000.0)
    p.add_argument("--t-end", type=float, default=None)
    p.add_argument("--seed", type=int, default=None)
    p.add_argument("--interference", type=int, default=0,
                   help="busy-loop processes to run alongside")
    p.add_argument("--audit", action="store_true",
                   help="step workers cooperatively and sweep after every GVT publication")
    p.add_argument("--reps", type=int, default=1)
    p.add_argument("--out", default=None, help="CSV output path (default: stdout)")
    p.add_argument("--config", default=None, help="PHOLD key = value file")
    p.add_argument("--checkpoint-interval", type=int, default=1)
    p.add_argument("--switch-interval-us", type=float, default=None,
                   help="interpreter thread switch interval during runs")
    p.add_argument("-v", "--verbose", action="store_true")
    return p


def config_from_args(args: argparse.Namespace) -> RunConfig:
    phold = load_config(args.config) if args.config else PholdConfig()
    overrides = {}
    if args.lps is not None:
        overrides["num_lps"] = args.lps
    if args.t_end is not None:
        overrides["t_end"] = args.t_end
    if args.seed is not None:
        overrides["seed"] = args.seed
    phold = replace(phold, **overrides)
    return RunConfig(protocol=args.protocol, workers=args.workers,
                     gvt_interval_s=args.gvt_interval_ms / 1000.0, phold=phold,
                     interference=args.interference, audit=args.audit,
                     repetitions=args.reps,
                     checkpoint_interval=args.checkpoint_interval,
                     switch_interval_s=(None if args.switch_interval_us is None
                                        else args.switch_interval_us / 1e6)).validate()


def main(argv: Optional[List[str]] = None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        cfg = config_from_args(args)
    except (ConfigError, ValueError, OSError) as exc:
        print(f"twgvt: invalid configuration: {exc}", file=sys.stderr)
        return EXIT_CONFIG

    try:
        metrics = run_experiment(cfg)
        for m in metrics:
            check_metrics(m)
    except (ProtocolFault, RunFault) as exc:
        print(f"twgvt: protocol fault: {exc}", file=sys.stderr)
        return EXIT_FAULT

    if args.out:
        emit_csv(metrics, args.out)
    else:
        write_csv(metrics, sys.stdout)
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
