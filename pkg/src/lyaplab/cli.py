"""Command-line interface: list, validate, run, replay."""

from __future__ import annotations

import argparse
import json
import sys

from .config import ConfigError, load_config
from .presets import catalog
from .runner import EXPERIMENTS, OutputLockError, replay, run


def main(argv: list[str] | None = None) -> int:
    parser = argparse.ArgumentParser(
        prog="lyaplab",
        description="Monte Carlo Lyapunov spectra of flat bundles over hyperbolic surfaces",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    sub.add_parser("list", help="list bundled presets")

    p_val = sub.add_parser("validate", help="validate a config file")
    p_val.add_argument("config")

    p_run = sub.add_parser("run", help="run an experiment from a config")
    p_run.add_argument("config")
    p_run.add_argument("experiment", choices=EXPERIMENTS)
    p_run.add_argument("--output-dir", default=None, help="override the output directory")

    p_rep = sub.add_parser("replay", help="re-simulate one trajectory from a run log")
    p_rep.add_argument("runlog")
    p_rep.add_argument("trajectory_id", type=int)

    args = parser.parse_args(argv)

    if args.command == "list":
        for preset in catalog():
            tag = " (parameters required)" if preset.parameters_required else ""
            print(f"{preset.name:28s} [{preset.surface}]{tag}")
            print(f"    {preset.description}")
        return 0

    if args.command == "validate":
        try:
            cfg = load_config(args.config)
        except ConfigError as exc:
            print(f"invalid: {exc}", file=sys.stderr)
            return 1
        print(f"ok: {cfg.name} ({cfg.surface_name}, n_paths={cfg.n_paths}, seed={cfg.path_config.rng_seed})")
        return 0

    if args.command == "run":
        try:
            cfg = load_config(args.config)
            record = run(cfg, args.experiment, args.output_dir)
        except (ConfigError, OutputLockError, ValueError) as exc:
            print(f"error: {exc}", file=sys.stderr)
            return 1
        print(f"done: {record.experiment} (config {record.config_hash[:16]})")
        for name, digest in sorted(record.outputs.items()):
            print(f"  {name}  sha256 {digest[:16]}")
        for key, value in sorted(record.verdicts.items()):
            print(f"  {key}: {value}")
        return 0

    if args.command == "replay":
        print(json.dumps(replay(args.runlog, args.trajectory_id), indent=2))
        return 0

    return 2  # pragma: no cover


if __name__ == "__main__":  # pragma: no cover
    raise SystemExit(main())
