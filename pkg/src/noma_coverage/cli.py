"""Command-line interface: ``noma-coverage {analytic,simulate,sweep,validate,oracle}``."""
from __future__ import annotations

import argparse
import sys
from pathlib import Path

from .config import Engine, parse_config
from .coverage import ROLES, SCHEMES
from .laplace import QuadratureError
from .simulation import fading_oracle
from .spatial import ConfigError, OrderedDistancePair, db_to_linear
from .sweep import format_csv, run_sweep
from .validate import format_report, report_csv, run_validate

# convenience flags mapped onto config keys
FLAG_KEYS = {
    "model": "model.kind",
    "lambda_b": "model.lambda_b",
    "radius": "model.r",
    "alpha": "model.alpha",
    "trials": "mc.trials",
    "seed": "mc.seed",
    "workers": "mc.workers",
    "variant": "laplace_variant",
    "output": "output",
}


def _overrides(args) -> dict:
    values = {}
    for item in args.set or []:
        if "=" not in item:
            raise ConfigError(f"--set expects key=value, got {item!r}")
        key, value = (p.strip() for p in item.split("=", 1))
        values[key.lower()] = value
    for flag, key in FLAG_KEYS.items():
        v = getattr(args, flag, None)
        if v is not None:
            values[key] = str(v)
    if getattr(args, "no_timing", False):
        values["output.timing"] = "false"
    return values


def _add_spec_args(p: argparse.ArgumentParser):
    p.add_argument("--config", type=Path, help="flat key = value config file")
    p.add_argument("--set", action="append", metavar="KEY=VALUE",
                   help="override a config key (repeatable)")
    p.add_argument("--model", help="PPP, MCP or both")
    p.add_argument("--lambda-b", dest="lambda_b", type=float)
    p.add_argument("--radius", type=float, help="MCP cluster radius R")
    p.add_argument("--alpha", type=float)
    p.add_argument("--trials", type=int)
    p.add_argument("--seed", type=int)
    p.add_argument("--workers", type=int)
    p.add_argument("--variant", choices=["auto", "exact", "approx"])
    p.add_argument("--output", "-o", help="CSV path ('-' for stdout)")
    p.add_argument("--no-timing", action="store_true",
                   help="write wall_ms as 0 so reruns are byte-identical")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="noma-coverage",
                                     description="Uplink NOMA SIR coverage: analysis and simulation.")
    sub = parser.add_subparsers(dest="command", required=True)
    for name, help_ in [("analytic", "analytic coverage sweep"),
                        ("simulate", "Monte Carlo coverage sweep"),
                        ("sweep", "sweep with the engine chosen in the config")]:
        _add_spec_args(sub.add_parser(name, help=help_))

    v = sub.add_parser("validate", help="run the validation suite")
    v.add_argument("--level", choices=["fast", "full"], default="fast")
    v.add_argument("--report", type=Path, help="machine-readable CSV report path")
    v.add_argument("--inject-fault", action="store_true", help=argparse.SUPPRESS)

    o = sub.add_parser("oracle", help="brute-force conditional coverage for one pair")
    o.add_argument("--r1", type=float, required=True)
    o.add_argument("--r2", type=float, required=True)
    o.add_argument("--alpha", type=float, default=4.0)
    t = o.add_mutually_exclusive_group(required=True)
    t.add_argument("--t", type=float, help="linear SIR threshold")
    t.add_argument("--t-db", type=float, help="SIR threshold in dB")
    o.add_argument("--i-const", type=float, default=0.0)
    o.add_argument("--draws", type=int, default=1_000_000)
    o.add_argument("--seed", type=int, default=0)
    return parser


def _sweep(args, engine: Engine | None) -> int:
    values = _overrides(args)
    if engine is not None:
        values["engine"] = engine.value
    spec = parse_config(args.config, values)
    rows = run_sweep(spec)
    text = format_csv(rows)
    if str(spec.output_path) == "-":
        sys.stdout.write(text)
    else:
        spec.output_path.parent.mkdir(parents=True, exist_ok=True)
        with open(spec.output_path, "w", encoding="utf-8", newline="") as fh:
            fh.write(text)
        print(f"wrote {len(rows)} rows to {spec.output_path}", file=sys.stderr)
    return 0


def _validate(args) -> int:
    results, ok = run_validate(args.level, inject_fault=args.inject_fault)
    print(format_report(results))
    print(f"{sum(r.passed for r in results)}/{len(results)} checks passed")
    if args.report:
        args.report.write_text(report_csv(results, args.level), encoding="utf-8")
    return 0 if ok else 1


def _oracle(args) -> int:
    T = args.t if args.t is not None else float(db_to_linear(args.t_db))
    pair = OrderedDistancePair(args.r1, args.r2)
    p, se = fading_oracle(pair, args.alpha, T, args.i_const, args.draws, args.seed)
    print("scheme,role,probability,standard_error")
    for i, scheme in enumerate(SCHEMES):
        for j, role in enumerate(ROLES):
            print(f"{scheme.value},{role.value},{float(p[i, j])!r},{float(se[i, j])!r}")
    return 0


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        if args.command == "analytic":
            return _sweep(args, Engine.ANALYTIC)
        if args.command == "simulate":
            return _sweep(args, Engine.MC)
        if args.command == "sweep":
            return _sweep(args, None)
        if args.command == "validate":
            return _validate(args)
        return _oracle(args)
    except (ConfigError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except (QuadratureError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
