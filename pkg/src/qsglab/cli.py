"""Command line: ``qsglab {scaling,gg,classical,rsb} [--config FILE] [flags]``."""

from __future__ import annotations

import argparse
import sys

import numpy as np

from .config import parse_config
from .errors import CapacityError, NumericalError
from .experiments import EXPERIMENTS, RUNNERS
from .results import emit_results


def _ints(text):
    return tuple(int(x) for x in text.split(",") if x)


def _floats(text):
    return tuple(float(x) for x in text.split(",") if x)


def _path(text):
    """``"0.4:0.4,0.2:0.2,0:0"`` -> ((0.4, 0.4), (0.2, 0.2), (0.0, 0.0))."""
    points = []
    for item in text.split(","):
        J0, _, J1 = item.partition(":")
        points.append((float(J0), float(J1 or J0)))
    return tuple(points)


def _param(text):
    key, sep, value = text.partition("=")
    if not sep:
        raise argparse.ArgumentTypeError(f"expected key=value, got {text!r}")
    if value.lower() in ("true", "false"):
        return key, value.lower() == "true"
    return key, float(value)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="qsglab", description=__doc__)
    sub = parser.add_subparsers(dest="experiment", required=True)
    for name in EXPERIMENTS:
        p = sub.add_parser(name)
        p.add_argument("--config", help="TOML run config; flags override its values")
        p.add_argument("--model", help="model preset name")
        p.add_argument("--param", action="append", type=_param, metavar="KEY=VALUE",
                       help="model preset parameter (repeatable)")
        p.add_argument("--d", type=int, help="lattice dimension")
        p.add_argument("--boundary", choices=("open", "periodic"))
        p.add_argument("--term", help="term label of the observable")
        p.add_argument("--L-grid", type=_ints, help="comma-separated linear sizes")
        p.add_argument("--beta-grid", type=_floats, help="comma-separated inverse temperatures")
        p.add_argument("--samples", type=int, help="Monte Carlo disorder samples")
        p.add_argument("--quadrature-order", type=int,
                       help="Gauss-Hermite order (exact disorder average) instead of MC")
        p.add_argument("--seed", type=int, help="master seed")
        p.add_argument("--max-dim", type=int, help="largest Hilbert-space dimension allowed")
        p.add_argument("--jobs", type=int, help="worker processes")
        p.add_argument("--format", choices=("csv", "jsonl"))
        p.add_argument("--out", help="output path (default results/<experiment>.<format>)")
        if name == "gg":
            p.add_argument("--monomials", type=lambda s: tuple(s.split(",")),
                           help="comma-separated monomials, e.g. 1,R12,R23")
        if name == "rsb":
            p.add_argument("--coupling-path", type=_path, help="J0:J1 points, e.g. 0.4:0.4,0:0")
            p.add_argument("--share-g0", action="store_true", default=None,
                           help="reuse the observable's draws for the inter-replica term")
    return parser


def _overrides(args) -> dict:
    skip = {"config", "param"}
    out = {k: v for k, v in vars(args).items() if k not in skip}
    if args.param:
        out["model_params"] = dict(args.param)
    return out


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        cfg = parse_config(args.config, _overrides(args))
        records = RUNNERS[cfg.experiment](cfg)
        out = cfg.out or f"results/{cfg.experiment}.{cfg.format}"
        path = emit_results(records, cfg.format, out)
    except (ValueError, KeyError, CapacityError, OSError) as exc:
        print(f"qsglab: error: {exc}", file=sys.stderr)
        return 1
    except (NumericalError, np.linalg.LinAlgError, FloatingPointError) as exc:
        print(f"qsglab: numerical failure: {exc}", file=sys.stderr)
        return 2
    print(f"{cfg.experiment}: {len(records)} records, config {cfg.config_hash()} -> {path}")
    return 0


if __name__ == "__main__":
    sys.exit(main())
