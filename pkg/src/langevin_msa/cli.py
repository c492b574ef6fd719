"""``langevin-msa <mode> [options]``.

Exit status: 0 when every pass/fail check of the run passes, 1 when one fails,
2 for configuration or argument errors.
"""

from __future__ import annotations

import argparse
import logging
import sys
from pathlib import Path
from typing import List, Optional

from .config import MODES, build_config, mode_from_file, read_pairs
from .errors import ConfigError, NumericalDivergenceError
from .harness import run

# flag name -> config key; every config key is also reachable through --set
FLAGS = {
    "potential": "potential",
    "d": "d",
    "h": "h",
    "replicas": "replicas",
    "steps": "steps",
    "time": "time",
    "seed": "seed",
    "out": "out",
    "eps": "eps",
    "x0": "x0",
    "workers": "workers",
}


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(
        prog="langevin-msa",
        description="Langevin Monte Carlo sampler, error-bound calculator and verification harness.",
    )
    ap.add_argument("mode", choices=MODES)
    ap.add_argument("--config", help="key=value file, or an earlier output file to rerun")
    ap.add_argument("--potential", help="f1, f2, quadratic(1,4), quadratic(m=1,L=4,d=16), ...")
    ap.add_argument("--d", help="dimension list, e.g. 2,8,32")
    ap.add_argument("--h", help="step size list, e.g. 0.1,0.2")
    ap.add_argument("--replicas", help="number of independent chains M")
    ap.add_argument("--steps", help="iterations K")
    ap.add_argument("--time", help="time horizon T (steps = ceil(T/h))")
    ap.add_argument("--seed", help="master seed")
    ap.add_argument("--out", help="output path (default: stdout)")
    ap.add_argument("--eps", help="accuracy list for mixing-time bounds")
    ap.add_argument("--x0", help="start: a number, a comma list, or 'stationary'")
    ap.add_argument("--workers", help="worker threads; results do not depend on it")
    ap.add_argument("--set", action="append", default=[], metavar="KEY=VALUE",
                    help="set any config key; repeatable")
    ap.add_argument("-v", "--verbose", action="store_true")
    return ap


def main(argv: Optional[List[str]] = None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        pairs = []
        if args.config:
            file_mode = mode_from_file(args.config)
            if file_mode is not None and file_mode != args.mode:
                raise ConfigError(f"{args.config} was produced by mode {file_mode}, not {args.mode}")
            pairs = read_pairs(args.config)
        overrides = {}
        for item in args.set:
            key, sep, value = item.partition("=")
            if not sep:
                raise ConfigError(f"--set expects KEY=VALUE, got {item!r}")
            overrides[key.strip()] = value
        for flag, key in FLAGS.items():
            value = getattr(args, flag)
            if value is not None:
                overrides[key] = value
        cfg = build_config(args.mode, pairs, overrides)
        report = run(cfg)
    except (ConfigError, ValueError, FileNotFoundError) as exc:
        print(f"langevin-msa: error: {exc}", file=sys.stderr)
        return 2
    except NumericalDivergenceError as exc:
        print(f"langevin-msa: error: {exc}", file=sys.stderr)
        return 1

    text = report.text()
    if cfg.out:
        Path(cfg.out).write_text(text)
    else:
        sys.stdout.write(text)
    for c in report.checks:
        print(c.line(), file=sys.stderr)
    return 0 if report.passed else 1


if __name__ == "__main__":
    sys.exit(main())
