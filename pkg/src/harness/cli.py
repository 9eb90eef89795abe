"""
Command-line entry point.

Usage:
    python run_dbc.py gen-demos --config configs/maze.cfg --out runs/maze
    python run_dbc.py train-dm --out runs/maze
    python run_dbc.py train-policy --out runs/maze --seed 1
    python run_dbc.py train-baseline --method ibc --out runs/maze
    python run_dbc.py eval --method dbc --band eval --out runs/maze
"""
import argparse
import logging
from typing import List, Optional

from src.config import settings
from src.errors import DbcError
from src.harness.config import load_config
from src.harness.experiments import BASELINES, SUBCOMMANDS, run_experiment

logger = logging.getLogger(__name__)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(description="Diffusion-guided behavioral cloning toolkit")
    parser.add_argument("subcommand", choices=SUBCOMMANDS, help="Pipeline stage or study to run")
    parser.add_argument("--config", default=None, help="Flat `key = value` config file")
    parser.add_argument("--seed", type=int, default=None, help="Base seed (overrides the config)")
    parser.add_argument("--out", default=settings.DBC_OUT_DIR, help=f"Artifact directory (default: {settings.DBC_OUT_DIR})")
    parser.add_argument("--method", choices=BASELINES + ("dbc",), default=None,
                        help="Baseline to train, or method to evaluate")
    parser.add_argument("--band", choices=("train", "eval"), default=None, help="Goal band for evaluation")
    parser.add_argument("--log-level", default=settings.DBC_LOG_LEVEL, help="Logging level")
    parser.add_argument("--quiet", action="store_true", help="Skip the summary table")
    return parser


def main(argv: Optional[List[str]] = None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=args.log_level.upper(), format="%(asctime)s %(levelname)s %(name)s: %(message)s")
    try:
        settings.validate_env()
    except ValueError as e:
        logger.error(f"❌ Invalid environment settings: {e}")
        return 2
    try:
        cfg = load_config(args.config, seed=args.seed, goal_band=args.band)
        if args.subcommand == "train-baseline" and args.method == "dbc":
            logger.warning("⚠️ 'dbc' is not a baseline; running train-policy instead")
            args.subcommand = "train-policy"
        run_experiment(cfg, args.subcommand, args.out, method=args.method, band=args.band,
                       show_summary=not args.quiet)
    except DbcError as e:
        logger.error(f"❌ {e}")
        return e.exit_code
    return 0
