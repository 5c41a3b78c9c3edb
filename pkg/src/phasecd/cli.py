"""Command-line entry point: ``phasecd <subcommand> [options]``."""
from __future__ import annotations

import argparse
import json
import sys
from dataclasses import asdict

import yaml

from .bench import KINDS, SpecError, aggregate, default_spec, load_spec, run_experiment

SUBCOMMAND_KIND = {"recover": "recover", "sparse": "sparse", "equalize": "equalize"}


def _build_parser():
    parser = argparse.ArgumentParser(prog="phasecd", description="Coordinate-descent phase retrieval benchmarks.")
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p):
        p.add_argument("--config", help="YAML experiment file (see print-defaults)")
        p.add_argument("--seed", type=int, help="base seed (unsigned 64-bit)")
        p.add_argument("--out", help="output directory")
        p.add_argument("--trials", type=int, help="number of Monte-Carlo trials")
        p.add_argument("--solver", help="comma-separated solver names, e.g. ccd,rcd,gcd,wf")
        p.add_argument("--workers", type=int, help="parallel worker processes")

    for name in ("recover", "sparse", "equalize"):
        common(sub.add_parser(name, help=f"run a {name} experiment"))
    curve = sub.add_parser("curve", help="success-probability or NMSE sweep")
    common(curve)
    curve.add_argument("--kind", choices=("success", "nmse"), default=None,
                       help="success: sweep M/N; nmse: sweep SNR (default from config, else success)")
    defaults = sub.add_parser("print-defaults", help="print the default config of an experiment kind")
    defaults.add_argument("kind", nargs="?", choices=KINDS, help="omit to print every kind")
    return parser


def _resolve_spec(args):
    if args.command == "curve":
        kind = f"{args.kind}-curve" if args.kind else None
    else:
        kind = SUBCOMMAND_KIND[args.command]
    if args.config:
        if kind is None:
            with open(args.config) as fh:
                data = yaml.safe_load(fh)
            declared = data.get("kind") if isinstance(data, dict) else None
            kind = declared if declared in ("success-curve", "nmse-curve") else "success-curve"
        spec = load_spec(args.config, kind)
    else:
        spec = default_spec(kind or "success-curve")
    if args.seed is not None:
        spec.base_seed = args.seed
    if args.out is not None:
        spec.out = args.out
    if args.trials is not None:
        spec.trials = args.trials
    if args.solver:
        spec.solvers = [s.strip() for s in args.solver.split(",") if s.strip()]
    if args.workers is not None:
        spec.workers = args.workers
    return spec


def _print_table(rows, out=None):
    out = out or sys.stdout
    out.write(f"{'solver':<10}{'point':>8}{'trials':>8}{'P(success)':>12}{'NMSE':>12}{'cycles':>10}{'ISI':>12}\n")
    for r in rows:
        point = "" if r["point"] is None else f"{r['point']:g}"
        nmse = "" if r["nmse"] is None else f"{r['nmse']:.3e}"
        isi = "" if r["mean_final_isi"] is None else f"{r['mean_final_isi']:.3e}"
        out.write(f"{r['solver']:<10}{point:>8}{r['trials']:>8}{r['success_probability']:>12.3f}"
                  f"{nmse:>12}{r['mean_cycles']:>10.1f}{isi:>12}\n")


def main(argv=None) -> int:
    args = _build_parser().parse_args(argv)
    if args.command == "print-defaults":
        kinds = [args.kind] if args.kind else list(KINDS)
        docs = {k: asdict(default_spec(k)) for k in kinds}
        sys.stdout.write(yaml.safe_dump(docs[kinds[0]] if args.kind else docs, sort_keys=False))
        return 0
    try:
        spec = _resolve_spec(args)
        summary = run_experiment(spec)
    except SpecError as exc:
        sys.stdout.write(exc.to_json() + "\n")
        return 2
    except yaml.YAMLError as exc:
        sys.stdout.write(json.dumps({"error": "invalid experiment spec", "violations": [f"config: {exc}"]}) + "\n")
        return 2
    except OSError as exc:
        sys.stdout.write(json.dumps({"error": "io", "message": str(exc)}) + "\n")
        return 3
    _print_table(aggregate(summary["records"]))
    return 0


if __name__ == "__main__":
    sys.exit(main())
