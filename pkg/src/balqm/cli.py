"""Command line entry point: ``balqm {check,barriers,solve,verify,all}``."""

from __future__ import annotations

import argparse
import logging
import sys

from .config import ConfigError, parse_config
from .pipeline import SUBCOMMAND_STAGES, emit, run_pipeline

EXIT_OK, EXIT_ASSERT, EXIT_CONFIG, EXIT_INTERNAL = 0, 1, 2, 3


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="balqm",
        description="Check, discretize and solve balanced quasi-monotone elliptic systems.")
    parser.add_argument("command", choices=sorted(SUBCOMMAND_STAGES))
    parser.add_argument("--config", help="JSON run configuration (defaults if omitted)")
    parser.add_argument("--out", help="output directory (overrides output.dir)")
    parser.add_argument("--seed", type=int, help="sampler seed (overrides config)")
    parser.add_argument("--strict", action="store_true", help="reject unknown config keys")
    parser.add_argument("-v", "--verbose", action="store_true")
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        text = "{}"
        if args.config:
            with open(args.config, encoding="utf-8") as fh:
                text = fh.read()
        cfg = parse_config(text, strict=args.strict)
        if args.seed is not None:
            if args.seed < 0:
                raise ConfigError("seed", "must be nonnegative")
            cfg.seed = args.seed
    except (ConfigError, OSError) as exc:
        print(f"invalid configuration: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    out_dir = args.out or cfg.output["dir"]
    cfg.output["dir"] = out_dir
    try:
        report = run_pipeline(cfg, SUBCOMMAND_STAGES[args.command])
    except Exception as exc:  # noqa: BLE001
        logging.getLogger("balqm").exception("pipeline crashed")
        print(f"internal error: {exc}", file=sys.stderr)
        return EXIT_INTERNAL
    try:
        paths = emit(report, out_dir)
    except OSError as exc:
        print(f"cannot write outputs: {exc}", file=sys.stderr)
        return EXIT_INTERNAL
    for name, a in report.assertions.items():
        print(f"{'PASS' if a['passed'] else 'FAIL'} {name}")
    for p in paths:
        print(f"wrote {p}")
    return EXIT_OK if report.passed else EXIT_ASSERT


if __name__ == "__main__":
    sys.exit(main())
