"""Command line front end.

Subcommands: run one simulation, sweep a seed range, export a survival curve
table from a trace column, or validate a config file. The output directory
can also come from the SLICESTEER_OUT_DIR environment variable.
"""

from __future__ import annotations

import argparse
import os
import sys
from pathlib import Path

from . import metrics, traces
from .config import AGENT_NAMES, ConfigError, load_config
from .dqn import TrainingDiverged
from .simulation import run_simulation

STEERING_CHOICES = ("none", "ar1", "ar2", "ar3", "ar4")


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="slicesteer",
        description="Deterministic RAN slicing simulator with steerable "
                    "learning schedulers")
    sub = parser.add_subparsers(dest="command", required=True)

    run = sub.add_parser("run", help="execute one simulation")
    run.add_argument("--config", default="default",
                     help="config JSON path, or 'default'")
    run.add_argument("--seed", type=int, default=None, help="override the seed")
    run.add_argument("--ttis", type=int, default=None,
                     help="override total_ttis")
    run.add_argument("--steering", choices=STEERING_CHOICES, default=None,
                     help="apply one steering procedure to every agent")
    run.add_argument("--out", default=None, help="output directory")

    sweep = sub.add_parser("sweep", help="run several seeds back to back")
    sweep.add_argument("--config", default="default")
    sweep.add_argument("--seeds", type=int, required=True,
                       help="number of consecutive seeds")
    sweep.add_argument("--base-seed", type=int, default=None,
                       help="first seed (defaults to the config seed)")
    sweep.add_argument("--ttis", type=int, default=None)
    sweep.add_argument("--steering", choices=STEERING_CHOICES, default=None)
    sweep.add_argument("--out", default=None, help="parent output directory")

    ecc = sub.add_parser("eccdf", help="survival-curve table from a trace column")
    ecc.add_argument("--trace", required=True, help="trace CSV path")
    ecc.add_argument("--column", required=True, help="column to sample")
    ecc.add_argument("--slice", default=None,
                     help="restrict to one slice (embb/urllc/mmtc)")
    ecc.add_argument("--out", required=True, help="output CSV path")

    val = sub.add_parser("validate-config", help="check a config file")
    val.add_argument("path", help="config JSON path, or 'default'")
    return parser


def _resolve_out(arg_out, default_name: str) -> Path:
    if arg_out:
        return Path(arg_out)
    env = os.environ.get("SLICESTEER_OUT_DIR")
    if env:
        return Path(env) / default_name
    return Path(default_name)


def _apply_overrides(cfg_dict_loader, args):
    cfg = cfg_dict_loader(args.config)
    if args.seed is not None:
        cfg.seed = args.seed
    if args.ttis is not None:
        cfg.total_ttis = args.ttis
    if args.steering is not None:
        cfg.steering = {name: args.steering for name in AGENT_NAMES}
    cfg.validate()
    return cfg


def cmd_run(args) -> int:
    cfg = _apply_overrides(load_config, args)
    out = _resolve_out(args.out, f"run_seed{cfg.seed}")
    result = run_simulation(cfg, out_dir=out)
    s = result.summary
    print(f"run complete: seed={s['seed']} ttis={s['total_ttis']} "
          f"final_z={s['final_z']} out={out}")
    return 0


def cmd_sweep(args) -> int:
    base_cfg = load_config(args.config)
    base_seed = args.base_seed if args.base_seed is not None else base_cfg.seed
    parent = _resolve_out(args.out, "sweep")
    for offset in range(args.seeds):
        cfg = load_config(args.config)
        if args.ttis is not None:
            cfg.total_ttis = args.ttis
        if args.steering is not None:
            cfg.steering = {name: args.steering for name in AGENT_NAMES}
        cfg.seed = base_seed + offset
        cfg.validate()
        out = parent / f"seed_{cfg.seed}"
        run_simulation(cfg, out_dir=out)
        print(f"seed {cfg.seed} done -> {out}")
    return 0


def cmd_eccdf(args) -> int:
    where = {"slice": args.slice} if args.slice else None
    samples = traces.read_column(args.trace, args.column, where=where)
    if not samples:
        print(f"error: no samples in column {args.column!r}", file=sys.stderr)
        return 2
    curve = metrics.eccdf(samples)
    rows = [{"value": float(v), "survival": float(s)}
            for v, s in zip(curve.values, curve.survival)]
    traces.write_csv(args.out, ("value", "survival"), rows)
    print(f"wrote {len(rows)} curve points -> {args.out}")
    return 0


def cmd_validate(args) -> int:
    load_config(args.path)
    print(f"config ok: {args.path}")
    return 0


def main(argv=None) -> int:
    args = _build_parser().parse_args(argv)
    handlers = {"run": cmd_run, "sweep": cmd_sweep, "eccdf": cmd_eccdf,
                "validate-config": cmd_validate}
    try:
        return handlers[args.command](args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2
    except TrainingDiverged as exc:
        print(f"training diverged: {exc}", file=sys.stderr)
        return 3
    except (FileNotFoundError, KeyError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
