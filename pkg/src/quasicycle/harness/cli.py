"""Command-line entry point.

Usage::

    quasicycle [--config PATH] [--seed U64] [--out DIR] [--threads K]
               [--set KEY=VALUE ...] {sweep,raster,snapshots,single,validate}

Settings are resolved in order: defaults, then ``--config``, then ``--set``,
then ``--seed``. Every run writes ``config.echo`` next to its outputs.
"""
from __future__ import annotations

import argparse
import sys
from pathlib import Path

from ..config import NetworkConfig, load_config, parse_config
from ..errors import QuasiCycleError
from . import commands
from .io import emit_csv

__all__ = ["build_parser", "resolve_config", "main"]


def _u64(text: str) -> int:
    value = int(text, 0)
    if not 0 <= value < 1 << 64:
        raise argparse.ArgumentTypeError(f"seed must fit in 64 bits, got {text}")
    return value


def _positive(text: str) -> int:
    value = int(text)
    if value < 1:
        raise argparse.ArgumentTypeError(f"must be >= 1, got {text}")
    return value


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(
        prog="quasicycle",
        description="Simulate networks of coupled noise-driven E-I oscillators.",
    )
    ap.add_argument("--config", type=Path, help="key = value config file")
    ap.add_argument("--seed", type=_u64, help="64-bit master seed (overrides the config)")
    ap.add_argument("--out", type=Path, default=Path("out"), help="output directory (default: out)")
    ap.add_argument("--threads", type=_positive, default=1,
                    help="worker processes for sweeps (default: 1)")
    ap.add_argument("--set", dest="overrides", action="append", default=[], metavar="KEY=VALUE",
                    help="override one config key; may be repeated")
    ap.add_argument("--no-figures", action="store_true", help="skip SVG output")
    sub = ap.add_subparsers(dest="command", required=True)
    sub.add_parser("sweep", help="time-averaged PLI over N and coupling norm")
    sub.add_parser("raster", help="synchronous-group membership of one run")
    sub.add_parser("snapshots", help="phase histograms at selected times")
    sub.add_parser("single", help="one oscillator: full model, reconstruction, amplitude, phase")
    v = sub.add_parser("validate", help="run the invariant and acceptance checks")
    v.add_argument("--only", default="", help="comma-separated check numbers (default: all)")
    return ap


def resolve_config(args) -> NetworkConfig:
    cfg = load_config(args.config) if args.config else NetworkConfig()
    if args.overrides:
        cfg = parse_config("\n".join(args.overrides), base=cfg)
    if args.seed is not None:
        cfg = cfg.replace(seed=args.seed)
    return cfg


def _validate(cfg: NetworkConfig, out: Path, only: str) -> int:
    from .validation import run_checks

    numbers = [int(s) for s in only.split(",") if s.strip()] or None
    results = run_checks(cfg, numbers)
    emit_csv(
        {
            "criterion": [r.number for r in results],
            "passed": [r.passed for r in results],
            "seconds": [r.seconds for r in results],
        },
        out / "validate.csv",
    )
    failed = [r.number for r in results if not r.passed]
    print(f"{len(results) - len(failed)}/{len(results)} checks passed"
          + (f"; failed: {failed}" if failed else ""))
    return 1 if failed else 0


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        cfg = resolve_config(args)
        figure = not args.no_figures
        if args.command == "sweep":
            paths = commands.sweep(cfg, args.out, threads=args.threads, figure=figure)
        elif args.command == "raster":
            paths = commands.raster(cfg, args.out, figure=figure)
        elif args.command == "snapshots":
            paths = commands.snapshots(cfg, args.out, figure=figure)
        elif args.command == "single":
            paths = commands.single(cfg, args.out, figure=figure)
        else:
            return _validate(cfg, args.out, args.only)
    except (QuasiCycleError, OSError, ValueError) as exc:
        print(f"quasicycle: error: {exc}", file=sys.stderr)
        return 2
    for p in paths:
        print(p)
    return 0


if __name__ == "__main__":
    sys.exit(main())
