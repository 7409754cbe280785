"""Command-line entry point: ``irregphon <stage> --config run.yaml``."""

from __future__ import annotations

import argparse
import logging
import sys
from pathlib import Path

from .config import ConfigError, load_config
from . import pipeline

logger = logging.getLogger("irregphon")


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", type=Path, required=True, help="YAML run configuration")
    common.add_argument("--seed", type=int, help="master seed (overrides config)")
    common.add_argument("--folds-phon", type=int, help="folds for phonotactic models (default 10)")
    common.add_argument("--folds-morph", type=int, help="lexeme folds for inflectors (default 30)")
    common.add_argument("--min-accuracy", type=float, help="accuracy gate threshold (default 0.75)")
    common.add_argument("--jobs", type=int, help="languages processed in parallel")
    common.add_argument("--out", type=Path, help="output directory (overrides config)")
    common.add_argument("--audit", action="store_true", default=None,
                        help="keep fold models and assert the leave-out guarantees")
    common.add_argument("-v", "--verbose", action="count", default=0)

    parser = argparse.ArgumentParser(prog="irregphon", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)
    sub.add_parser("ingest", parents=[common], help="parse and join inputs; write lexicons")
    sub.add_parser("measure", parents=[common], help="compute PC and MI, apply the gate")
    sub.add_parser("regress", parents=[common], help="per-language OLS, mixed models, Spearman")
    sub.add_parser("report", parents=[common], help="render SVG figures")
    sub.add_parser("run-all", parents=[common], help="every stage in order")
    return parser


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    level = logging.WARNING - 10 * min(args.verbose, 2)
    logging.basicConfig(level=level, format="%(levelname)s %(name)s: %(message)s", stream=sys.stderr)
    try:
        cfg = load_config(args.config).with_overrides(
            seed=args.seed, folds_phon=args.folds_phon, folds_morph=args.folds_morph,
            min_accuracy=args.min_accuracy, jobs=args.jobs, output_dir=args.out, audit=args.audit,
        ).validate()
    except ConfigError as exc:
        logger.error("%s", exc)
        return 2
    if args.command == "ingest":
        results = pipeline.run_ingest(cfg)
        return 0 if any(r.status == "ingested" for r in results) else 1
    if args.command == "measure":
        results = pipeline.run_measure(cfg)
        return 0 if any(r.included for r in results) else 1
    if args.command == "regress":
        return pipeline.run_regress(cfg)
    if args.command == "report":
        return pipeline.run_report(cfg)
    return pipeline.run_pipeline(cfg)


if __name__ == "__main__":
    sys.exit(main())
