#!/usr/bin/env python3
"""
qubitdyne: homodyne and heterodyne detection of a cavity mode through
repeated qubit collisions.

Main entry point for the application.

Usage:
    # Simulate a dataset from a preset or an experiment file
    python main.py simulate --preset fig2 --out data/runs/fig2
    python main.py simulate --config experiments/vacuum.toml --seed 7 --workers 8

    # Analyze or reconstruct a written dataset
    python main.py analyze --preset fig2 --values data/runs/fig2/fig2_values.csv
    python main.py reconstruct --preset fig2 --out data/runs/fig2

    # Parameter sweeps and phase estimation
    python main.py sweep --preset fig3
    python main.py phase-est --preset figS2

    # A run manifest is also a configuration
    python main.py simulate --config data/runs/fig2/fig2_simulate_manifest.json

Exit codes: 0 ok, 1 configuration error, 2 runtime or numerical error.
"""

import argparse
import json
import logging
import sys
from pathlib import Path

import numpy as np

from src.config.presets import PRESETS
from src.data_preparation.config_loader import ExperimentConfig, load_config, load_preset, validate_config
from src.utils.exceptions import ConfigError, QubitdyneError
from src.utils.logging_config import setup_logging

logger = logging.getLogger(__name__)

EXIT_OK = 0
EXIT_CONFIG = 1
EXIT_RUNTIME = 2
COMMANDS = ("simulate", "analyze", "reconstruct", "sweep", "phase-est")


def build_parser() -> argparse.ArgumentParser:
    """Argument parser with one subcommand per experiment stage."""
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument('--config', type=str, help='Experiment TOML file or run manifest JSON')
    common.add_argument('--preset', type=str, choices=sorted(PRESETS), help='Use a built-in figure preset')
    common.add_argument('--seed', type=int, help='Global seed (overrides the configuration)')
    common.add_argument('--workers', type=int, help='Worker threads (overrides the configuration)')
    common.add_argument('--out', type=str, help='Output directory (overrides the configuration)')
    common.add_argument('--log-level', type=str, help='Logging level (default from settings)')

    parser = argparse.ArgumentParser(description='qubitdyne detection simulator')
    commands = parser.add_subparsers(dest='command', required=True)
    commands.add_parser('simulate', parents=[common], help='Generate records and assembled values')
    analyze = commands.add_parser('analyze', parents=[common], help='KS statistics and histograms of a dataset')
    analyze.add_argument('--values', type=str, help='Values CSV (default: <out>/<prefix>_values.csv)')
    reconstruct = commands.add_parser('reconstruct', parents=[common], help='Maximum-likelihood tomography')
    reconstruct.add_argument('--values', type=str, help='Multi-angle values CSV (default: <out>/<prefix>_values.csv)')
    reconstruct.add_argument('--eta', type=float, help='Detection efficiency to compensate')
    commands.add_parser('sweep', parents=[common], help='Convergence tables for the [sweep] section')
    commands.add_parser('phase-est', parents=[common], help='Phase-estimation homodyne ensemble')
    return parser


def resolve_config(args: argparse.Namespace) -> ExperimentConfig:
    """Configuration from --config or --preset with command-line overrides applied."""
    if args.config and args.preset:
        raise ConfigError("Give either --config or --preset, not both")
    if args.config:
        config = load_config(args.config)
    elif args.preset:
        config = load_preset(args.preset)
    else:
        raise ConfigError("No configuration given; use --config PATH or --preset NAME")

    data = config.to_dict()
    if args.seed is not None:
        data["run"]["seed"] = args.seed
    if args.workers is not None:
        data["run"]["workers"] = args.workers
    if args.out is not None:
        data["output"]["directory"] = args.out
    if args.command == "phase-est":
        data["run"]["mode"] = "phase-est"
    return validate_config(data, "command line")


def dispatch(args: argparse.Namespace, config: ExperimentConfig) -> dict:
    """Run one subcommand."""
    from src.experiments.runner import ExperimentRunner

    runner = ExperimentRunner(config)
    default_values = Path(config.output.directory) / f"{config.output.prefix}_values.csv"
    if args.command == "simulate":
        return runner.simulate()
    if args.command == "analyze":
        return runner.analyze(args.values or default_values)
    if args.command == "reconstruct":
        return runner.reconstruct(args.values or default_values, args.eta)
    if args.command == "sweep":
        return runner.sweep()
    return runner.phase_est()


def main(argv=None) -> int:
    """Main entry point."""
    parser = build_parser()
    args = parser.parse_args(argv)
    setup_logging(args.log_level)

    try:
        config = resolve_config(args)
    except ConfigError as e:
        logger.error(f"Configuration error: {e}")
        for line in e.errors:
            print(f"  {line}", file=sys.stderr)
        return EXIT_CONFIG

    try:
        result = dispatch(args, config)
    except ConfigError as e:
        logger.error(f"Configuration error: {e}")
        return EXIT_CONFIG
    except (QubitdyneError, ArithmeticError, ValueError, np.linalg.LinAlgError, OSError) as e:
        logger.error(f"{args.command} failed: {e}", exc_info=True)
        return EXIT_RUNTIME

    print(json.dumps(result["outputs"], indent=2))
    return EXIT_OK


if __name__ == '__main__':
    sys.exit(main())
