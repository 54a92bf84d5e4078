"""Command-line front end: ``fracinv <stage> [options]``."""

from __future__ import annotations

import argparse
import logging
import sys

from .config import ConfigError, PipelineConfig
from .pipeline import STAGES, StageError, run

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_STAGE = 3


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="YAML file overriding the built-in defaults")
    common.add_argument("--seed", type=int, help="master seed (overrides the config)")
    common.add_argument("--out-dir", help="artifact directory (overrides the config)")
    common.add_argument("--case", type=int, choices=(1, 2, 3, 4),
                        help="run only this closure case in invert/report")
    common.add_argument("--jobs", type=int, help="worker processes for enumeration and inversion")
    common.add_argument("--force", action="store_true", help="recompute even if outputs exist")
    common.add_argument("-v", "--verbose", action="store_true")
    parser = argparse.ArgumentParser(
        prog="fracinv",
        description="Sequential fracture-network inversion from microseismic events and pressures.")
    sub = parser.add_subparsers(dest="stage", required=True)
    helps = {
        "synth": "generate the synthetic truth network and event catalog",
        "cluster": "k-means clustering, elbow curve and choice of k",
        "orient": "orientation histograms and per-cluster constraints",
        "invert": "LHS search over lengths and closure parameters",
        "report": "relative-error tables and summary report",
        "all": "run every stage in order",
    }
    for name in (*STAGES, "all"):
        sub.add_parser(name, parents=[common], help=helps[name])
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        if args.jobs is not None and args.jobs < 1:
            raise ConfigError("--jobs must be >= 1")
        cfg = PipelineConfig.load(args.config, {"seed": args.seed, "out_dir": args.out_dir,
                                                "jobs": args.jobs})
        cases = [args.case] if args.case else None
        out = run(cfg, args.stage, cases, args.force, cfg["jobs"])
    except ConfigError as exc:
        print(f"fracinv: configuration error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except StageError as exc:
        print(f"fracinv: stage failed: {exc}", file=sys.stderr)
        return EXIT_STAGE
    print(f"fracinv: {args.stage} finished; artifacts in {out}")
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
