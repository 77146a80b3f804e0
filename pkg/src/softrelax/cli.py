"""Command-line front end: ``softrelax run <scenario> [options]``."""
from __future__ import annotations

import argparse
import logging
import sys

from .scenario import EXIT_OK, EXIT_SOLVER, EXIT_VALIDATION, ScenarioError, bundled_scenarios, load_scenario, run_scenario


def _k_list(text: str):
    try:
        ks = tuple(int(k) for k in text.split(",") if k.strip())
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated integers, got {text!r}") from None
    if not ks or any(k < 2 for k in ks):
        raise argparse.ArgumentTypeError("laminate indices must be integers >= 2")
    return ks


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="softrelax", description="Relaxed softening-plasticity scenarios.")
    sub = ap.add_subparsers(dest="command", required=True)
    run = sub.add_parser("run", help="run a scenario file or a bundled scenario name")
    run.add_argument("scenario")
    run.add_argument("--out", metavar="DIR", help="output directory (default: scenario output.directory or runs/<name>)")
    run.add_argument("--steps", type=int, metavar="N", help="override the number of uniform time steps")
    run.add_argument("--verify", choices=["all", "energy", "stability", "none"], help="override the scenario's checks")
    run.add_argument("--laminate", type=_k_list, metavar="k1,k2,...", help="run a laminate study with these indices")
    run.add_argument("--seed", type=int, default=0, metavar="S", help="seed for the stability sampling")
    run.add_argument("-q", "--quiet", action="store_true")
    sub.add_parser("list", help="list bundled scenarios")
    return ap


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    if args.command == "list":
        print("\n".join(bundled_scenarios()))
        return EXIT_OK
    logging.basicConfig(level=logging.WARNING if args.quiet else logging.INFO, format="%(levelname)s %(name)s: %(message)s")
    try:
        sc = load_scenario(args.scenario)
        if args.steps is not None and args.steps < 1:
            raise ScenarioError("--steps", "must be a positive integer")
        res = run_scenario(sc, out_dir=args.out, verify=args.verify, laminate=args.laminate, steps=args.steps, seed=args.seed)
    except FileNotFoundError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_VALIDATION
    except ScenarioError as exc:
        print(f"invalid scenario: {exc}", file=sys.stderr)
        return EXIT_VALIDATION
    for msg in res.messages:
        print(msg, file=sys.stderr)
    if res.summary is not None and not args.quiet:
        s = res.summary
        print(f"{s['scenario']}: {s['steps']} steps -> {res.out_dir}")
        print(f"  t0_detected       {s['t0_detected']}")
        print(f"  |sigma_D|(T)      {s['final_stress']['sigma_dev_norm']:.12g}")
        print(f"  diss_H(T)         {s['diss_H']:.12g}")
        print(f"  energy residual   {s['energy_residual']:.3e}")
        if s["worst_stability_violation"] is not None:
            print(f"  worst stability   {s['worst_stability_violation']:.3e}")
        for name, ok in s["checks"].items():
            print(f"  check {name:<11} {'ok' if ok else 'FAILED'}")
    elif res.status == EXIT_SOLVER:
        print(f"solver failure, see {res.out_dir / 'diagnostic.json'}", file=sys.stderr)
    return res.status


if __name__ == "__main__":
    sys.exit(main())
