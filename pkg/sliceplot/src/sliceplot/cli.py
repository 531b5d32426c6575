"""Command line front end: render one figure from trace files."""

from __future__ import annotations

import argparse
import sys

from .figures import (METRIC_COLUMNS, PlotSpec, plot_convergence, plot_eccdf)


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="sliceplot",
        description="Render evaluation figures from simulator trace files")
    sub = parser.add_subparsers(dest="command", required=True)

    ecc = sub.add_parser("eccdf", help="survival curves, one per scenario")
    ecc.add_argument("inputs", nargs="+", help="trace CSV paths")
    ecc.add_argument("--metric", choices=sorted(METRIC_COLUMNS), required=True)
    ecc.add_argument("--out", required=True, help="output image path")
    ecc.add_argument("--label", action="append", default=None,
                     help="scenario label, once per input")

    conv = sub.add_parser("convergence", help="reward-vs-window panels")
    conv.add_argument("input", help="per-window trace CSV path")
    conv.add_argument("--out", required=True, help="output image path")
    conv.add_argument("--ma", type=int, default=50,
                      help="moving-average span in windows")
    conv.add_argument("--agents", default=None,
                      help="comma-separated agent subset")
    return parser


def cmd_eccdf(args) -> int:
    spec = PlotSpec(inputs=tuple(args.inputs), metric=args.metric,
                    output=args.out, labels=args.label)
    out = plot_eccdf(spec)
    print(f"wrote {out} and {len(spec.inputs)} point table(s)")
    return 0


def cmd_convergence(args) -> int:
    spec = PlotSpec(inputs=(args.input,), metric="reward", output=args.out)
    agents = args.agents.split(",") if args.agents else None
    out = plot_convergence(spec, ma_span=args.ma, agents=agents)
    print(f"wrote {out}")
    return 0


def main(argv=None) -> int:
    args = _build_parser().parse_args(argv)
    handlers = {"eccdf": cmd_eccdf, "convergence": cmd_convergence}
    try:
        return handlers[args.command](args)
    except FileNotFoundError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except KeyError as exc:
        print(f"error: column {exc} not present in trace", file=sys.stderr)
        return 2
    except ValueError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    raise SystemExit(main())
