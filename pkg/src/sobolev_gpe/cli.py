"""Command-line front end.

Subcommands:
    solve   --scenario file.json [--out DIR]
    sweep   --scenario file.json --axis beta --values 1,10,100 [--out DIR]
    certify --run DIR
    saddle  --scenario file.json [--eps 1e-2,1e-3,1e-4] [--out DIR]

The output root defaults to ./out and can be overridden with the
SOBOLEV_GPE_OUT environment variable or --out.
"""
from __future__ import annotations

import argparse
import json
import sys

from .errors import SobolevGpeError
from .scenarios import (OUTPUT_ROOT_ENV, Scenario, certify_run, run_scenario,
                        saddle_experiment, sweep)


def _parse_values(text: str):
    return [float(v) for v in text.split(",") if v.strip()]


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="sobolev-gpe",
        description="Adaptive-metric gradient descent experiments for "
                    "Gross-Pitaevskii-type ground states.")
    sub = parser.add_subparsers(dest="command", required=True)

    solve = sub.add_parser("solve", help="run one scenario end to end")
    solve.add_argument("--scenario", required=True, help="scenario JSON file")
    solve.add_argument("--out", default=None,
                       help=f"output root (default ./out or ${OUTPUT_ROOT_ENV})")

    swp = sub.add_parser("sweep", help="run a scenario across one parameter axis")
    swp.add_argument("--scenario", required=True)
    swp.add_argument("--axis", required=True, choices=["beta", "delta", "alpha", "tau"])
    swp.add_argument("--values", required=True, help="comma-separated numbers")
    swp.add_argument("--out", default=None)

    cert = sub.add_parser("certify", help="recompute diagnostics for a run directory")
    cert.add_argument("--run", required=True)

    sad = sub.add_parser("saddle", help="saddle-escape experiment with perturbed starts")
    sad.add_argument("--scenario", required=True)
    sad.add_argument("--eps", default=None, help="comma-separated noise levels")
    sad.add_argument("--out", default=None)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        if args.command == "solve":
            artifacts = run_scenario(Scenario.load(args.scenario), out_root=args.out)
            print(f"run complete: {artifacts.directory}")
            print(f"  iterations: {artifacts.trace.iterations} "
                  f"(stop: {artifacts.trace.stop_reason})")
            for key in ("lojasiewicz_summary", "certificate_summary"):
                if key in artifacts.diagnostics:
                    print(f"  {artifacts.diagnostics[key]}")
        elif args.command == "sweep":
            summary = sweep(Scenario.load(args.scenario), args.axis,
                            _parse_values(args.values), out_root=args.out)
            print(f"sweep summary: {summary}")
        elif args.command == "certify":
            diagnostics = certify_run(args.run)
            print(json.dumps(diagnostics, indent=2, sort_keys=True))
        elif args.command == "saddle":
            scenario = Scenario.load(args.scenario)
            eps = _parse_values(args.eps) if args.eps else None
            artifacts = saddle_experiment(scenario, epsilons=eps, out_root=args.out)
            print(f"saddle experiment complete: {artifacts.directory}")
            print(json.dumps(artifacts.diagnostics["saddle"], indent=2, sort_keys=True))
    except SobolevGpeError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except FileNotFoundError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
