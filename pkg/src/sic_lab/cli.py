"""Command-line entry point.

    sic-lab train --config cfg.yaml [--strategies ste bpad] [--gains 30 40]
    sic-lab ber   --config cfg.yaml --models out/
    sic-lab all   --config cfg.yaml

The environment variable SIC_LAB_SEED overrides the config seed; --output
overrides the config output directory.  The config file is echoed verbatim
into the output directory and a manifest with content hashes is written last.
"""

from __future__ import annotations

import argparse
import dataclasses
import os
import sys
from pathlib import Path

from .config import ConfigError, load_config
from .experiment import echo_config, run_ber_sweep, run_learning_experiment, write_manifest


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="sic-lab", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p):
        p.add_argument("--config", required=True, help="YAML experiment config")
        p.add_argument("--output", help="output directory (default: config output_dir)")

    p_train = sub.add_parser("train", help="run the SIC learning experiments")
    common(p_train)
    p_train.add_argument("--strategies", nargs="+", help="subset of strategies to run")
    p_train.add_argument("--gains", nargs="+", type=float, help="subset of LNA gains (dB)")

    p_ber = sub.add_parser("ber", help="run the BER/SINR sweep over trained models")
    common(p_ber)
    p_ber.add_argument("--models", required=True, help="directory holding model_*.npz")

    p_all = sub.add_parser("all", help="train, then sweep, into one output directory")
    common(p_all)
    p_all.add_argument("--strategies", nargs="+")
    p_all.add_argument("--gains", nargs="+", type=float)
    return parser


def main(argv=None) -> int:
    args = _build_parser().parse_args(argv)
    try:
        cfg, raw = load_config(args.config)
    except (ConfigError, OSError, ValueError) as exc:
        print(f"sic-lab: config error: {exc}", file=sys.stderr)
        return 2

    env_seed = os.environ.get("SIC_LAB_SEED")
    if env_seed is not None:
        cfg = dataclasses.replace(cfg, seed=int(env_seed))

    out = Path(args.output or cfg.output_dir)
    echo_config(out, raw)

    if args.command in ("train", "all"):
        logs = run_learning_experiment(cfg, out, args.strategies, args.gains)
        for label in sorted(logs):
            final = logs[label].residual_dbm_analog[-1]
            print(f"trained {label}: final analog residual {final:.1f} dBm")
    if args.command == "ber":
        rows = run_ber_sweep(cfg, args.models, out)
        print(f"ber sweep: {len(rows)} rows -> {out / 'ber.csv'}")
    elif args.command == "all":
        rows = run_ber_sweep(cfg, out, out)
        print(f"ber sweep: {len(rows)} rows -> {out / 'ber.csv'}")
    write_manifest(out, cfg.seed)
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
