"""Command-line entry point: ``python3 -m csgroup <subcommand>``."""

from __future__ import annotations

import argparse
import json
import sys

from .bms import build_bms, fig1_example
from .csg import csg_decompose
from .experiment import ExperimentManifest, ManifestError, run_decomposition_suite, run_optimization_suite


def _cmd_decompose(args) -> int:
    m = ExperimentManifest.load(args.manifest)
    paths = run_decomposition_suite(m, args.out, args.threads)
    print(json.dumps({k: str(v) for k, v in paths.items()}, indent=2))
    return 0


def _cmd_optimize(args) -> int:
    m = ExperimentManifest.load(args.manifest)
    paths = run_optimization_suite(m, args.out, args.threads, args.seed)
    print(json.dumps({k: str(v) for k, v in paths.items()}, indent=2))
    return 0


def _cmd_bench_info(args) -> int:
    inst = build_bms(args.function, args.dimension, args.seed)
    d = inst.descriptor()
    if not args.full:
        gt = d.pop("ground_truth")
        d["class_sizes"] = {
            "s1": len(gt["s1"]),
            "s2": len(gt["s2"]),
            "s3": len(gt["s3"]),
            "nonsep_groups": [len(g) for g in gt["nonsep"]],
        }
    print(json.dumps(d, indent=2))
    return 0


def _cmd_fig1(args) -> int:
    problem, truth = fig1_example()
    g, ledger = csg_decompose(problem)
    print(json.dumps({"grouping": g.to_json(ledger), "expected": truth.to_json()}, indent=2))
    return 0 if g.canonical() == truth.canonical() else 1


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="csgroup", description="Separability grouping toolkit")
    sub = p.add_subparsers(dest="command", required=True)

    d = sub.add_parser("decompose", help="run a decomposition manifest")
    d.add_argument("--manifest", required=True)
    d.add_argument("--out", help="output directory (overrides the manifest)")
    d.add_argument("--threads", type=int, default=1)
    d.set_defaults(fn=_cmd_decompose)

    o = sub.add_parser("optimize", help="run an optimization manifest")
    o.add_argument("--manifest", required=True)
    o.add_argument("--out", help="output directory (overrides the manifest)")
    o.add_argument("--seed", type=int, help="base seed (overrides the manifest)")
    o.add_argument("--threads", type=int, default=1)
    o.set_defaults(fn=_cmd_optimize)

    b = sub.add_parser("bench-info", help="describe one benchmark instance")
    b.add_argument("--function", type=int, required=True)
    b.add_argument("--dimension", type=int, required=True)
    b.add_argument("--seed", type=int, default=0)
    b.add_argument("--full", action="store_true", help="print full ground-truth index lists")
    b.set_defaults(fn=_cmd_bench_info)

    f = sub.add_parser("fig1-demo", help="decompose the 7-variable worked example")
    f.set_defaults(fn=_cmd_fig1)
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.fn(args)
    except (ManifestError, FileNotFoundError) as e:
        print(f"error: {e}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
