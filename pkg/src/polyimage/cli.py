"""Command-line front door.

Subcommands: synthesize (polyhedron JSON in, chain + trace JSON out),
evaluate (exact rational image of a point), verify (containment / coverage /
line-behavior / level-curve checks with mandatory seed), probe (single
line-behavior or level-curve diagnostic), and plot-data (CSV of image points
for visual inspection).

Exit codes: 0 success, 1 flag/input validation, 2 synthesis errors (layer,
compact base required, whole-space input; machine-readable JSON on stderr),
3 verification failure (violations present or coverage below threshold).

All file numbers are exact "p/q" strings; only the plot CSV is decimal.
Reports are byte-deterministic for fixed flags and seed (wall-clock time is
printed to stderr, never stored).
"""

from __future__ import annotations

import argparse
import json
import os
import sys
from fractions import Fraction

from . import verify as V
from .complement import synthesize_complement
from .errors import (CompactBaseRequired, LayerEncountered, PolyImageError,
                     SamplingStarved, UniversePolyhedron)
from .geometry import Polyhedron, rat, rat_str
from .interior_complement import synthesize_interior_complement
from .polyalg import MapChain


def _setup_threads():
    cap = os.environ.get("POLYIMAGE_THREADS")
    if cap:
        for var in ("OMP_NUM_THREADS", "OPENBLAS_NUM_THREADS", "MKL_NUM_THREADS"):
            os.environ.setdefault(var, cap)


def _load_polyhedron(path: str) -> Polyhedron:
    with open(path) as fh:
        return Polyhedron.from_json(json.load(fh))


def _load_chain(path: str) -> MapChain:
    with open(path) as fh:
        return MapChain.from_json(json.load(fh))


def _dump(obj: dict, path: str):
    with open(path, "w") as fh:
        json.dump(obj, fh, sort_keys=True, indent=1)
        fh.write("\n")


def _synthesis_error(exc: PolyImageError) -> int:
    payload = {"error": type(exc).__name__, "message": str(exc)}
    if exc.node is not None:
        payload["node"] = exc.node.to_json()
    if "path" in exc.payload:
        payload["path"] = list(exc.payload["path"])
    json.dump(payload, sys.stderr, sort_keys=True)
    sys.stderr.write("\n")
    return 2


def _parse_window(text: str, dim: int):
    """Either a scalar half-width or per-dimension 'lo,hi;lo,hi' bounds."""
    if ";" not in text and "," not in text:
        return rat(text)
    parts = text.split(";")
    return [tuple(rat(x) for x in part.split(",")) for part in parts]


def cmd_synthesize(args) -> int:
    poly = _load_polyhedron(args.input)
    provider = None
    if args.compact_base:
        supplied = _load_chain(args.compact_base)

        def provider(node):
            return supplied if supplied.dim == node.dim else None

    try:
        if args.target == "interior-complement":
            chain, trace = synthesize_interior_complement(poly, provider)
        else:
            chain, trace = synthesize_complement(poly, provider)
    except (LayerEncountered, CompactBaseRequired, UniversePolyhedron) as exc:
        return _synthesis_error(exc)
    _dump(chain.to_json(), args.out)
    if args.trace:
        _dump(trace.to_json(), args.trace)
    return 0


def cmd_evaluate(args) -> int:
    chain = _load_chain(args.chain)
    point = tuple(rat(x) for x in args.point.split(","))
    if len(point) != chain.dim:
        print("point arity does not match the chain", file=sys.stderr)
        return 1
    image = chain.chain_eval(point)
    print(",".join(rat_str(v) for v in image))
    return 0


def cmd_verify(args) -> int:
    chain = _load_chain(args.chain)
    poly = _load_polyhedron(args.poly)
    from .geometry import minimal_presentation
    poly = minimal_presentation(poly)
    mode = args.mode
    domain = V.RegionSpec.all_space(chain.dim)
    forbidden_mode = "interior" if args.target == "interior-complement" else "polyhedron"
    try:
        if mode == "containment":
            report = V.check_containment(
                chain, domain, V.RegionSpec(poly, forbidden_mode),
                n=args.samples, seed=args.seed, window=args.window)
            failed = bool(report.violations)
        elif mode == "coverage":
            target_mode = "interior-complement" if args.target == "interior-complement" \
                else "complement"
            report = V.check_coverage(
                chain, domain, V.RegionSpec(poly, target_mode),
                window=_parse_window(args.window, chain.dim),
                grid_step=rat(args.grid_step), n=args.samples, seed=args.seed,
                strategy=args.strategy, domain_window=args.domain_window)
            failed = report.coverage_fraction < args.min_coverage
        elif mode == "lemma52":
            report = _verify_lemma52(chain, poly, args)
            failed = bool(report.violations)
        elif mode == "levelcurve":
            report = _verify_levelcurve(poly, args)
            failed = bool(report.violations)
        else:
            print(f"unknown mode {mode}", file=sys.stderr)
            return 1
    except SamplingStarved as exc:
        json.dump({"error": "SamplingStarved", "message": str(exc)}, sys.stderr)
        sys.stderr.write("\n")
        return 1
    if args.report:
        _dump(report.to_json(), args.report)
    if report.runtime is not None:
        print(f"runtime: {report.runtime:.2f}s", file=sys.stderr)
    print(json.dumps(report.to_json(), sort_keys=True))
    return 3 if failed else 0


def _verify_lemma52(chain, poly, args) -> V.VerificationReport:
    """Line-behavior probes over a deterministic fan of base points."""
    import random
    from .complement import _build_sep, build_TK
    rng = random.Random(args.seed)
    sep, bounded = _build_sep(poly)
    t_k = build_TK(poly, sep)
    n = poly.dim
    half = rat(args.window)
    verdicts = []
    violations = []
    for i in range(args.samples):
        a_prime = tuple(Fraction(rng.randint(-int(half) * 8, int(half) * 8), 8)
                        for _ in range(n - 1))
        verdict = V.line_behavior_probe(t_k, poly, a_prime, window=float(half))
        verdicts.append(verdict)
        if not verdict["passed"]:
            violations.append(verdict)
    report = V.VerificationReport("lemma52", args.samples, violations,
                                  diagnostics={"bounded_position": bounded,
                                               "verdicts": verdicts},
                                  seed=args.seed)
    return report


def _verify_levelcurve(poly, args) -> V.VerificationReport:
    import random
    from .interior_complement import build_F, build_QGP
    rng = random.Random(args.seed)
    polys = build_QGP(poly)
    f2 = build_F(polys).components[-1]
    lam = rat(args.lam)
    ys = [Fraction(rng.randint(-15 * 8, 15 * 8), 8) for _ in range(args.samples)]
    probe = V.level_curve_diagnostics(f2, lam, ys, polys)
    violations = [] if probe.passed else [probe.verdicts]
    return V.VerificationReport(
        "levelcurve", len(probe.traced), violations,
        diagnostics={"lambda": rat_str(lam), "verdicts": probe.verdicts,
                     "branch": probe.branch}, seed=args.seed)


def cmd_probe(args) -> int:
    return cmd_verify(args)


def cmd_plot_data(args) -> int:
    import numpy as np
    chain = _load_chain(args.chain)
    poly = _load_polyhedron(args.poly)
    half = float(rat(args.window))
    rng = np.random.default_rng(args.seed)
    pts = rng.uniform(-half, half, size=(args.samples, chain.dim))
    images = chain.eval_float(pts)
    with open(args.out, "w") as fh:
        cols = ",".join(f"x{i + 1}" for i in range(chain.dim))
        fh.write(f"{cols},tag\n")
        for row in images:
            if not np.all(np.isfinite(row)):
                continue
            tag = "image-in-complement" if not poly.contains(
                tuple(Fraction(float(v)) for v in row)) else "image-in-polyhedron"
            fh.write(",".join(f"{v:.6g}" for v in row) + f",{tag}\n")
    return 0


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="polyimage",
                                 description="Synthesize and verify polynomial map "
                                             "chains onto polyhedral complements")
    sub = ap.add_subparsers(dest="command", required=True)

    p = sub.add_parser("synthesize", help="build a map chain for a polyhedron")
    p.add_argument("--input", required=True)
    p.add_argument("--target", choices=["complement", "interior-complement"],
                   default="complement")
    p.add_argument("--out", required=True)
    p.add_argument("--trace")
    p.add_argument("--compact-base", help="chain JSON supplying the bounded-base hook")
    p.set_defaults(func=cmd_synthesize)

    p = sub.add_parser("evaluate", help="exact image of a rational point")
    p.add_argument("--chain", required=True)
    p.add_argument("--point", required=True, help="comma-separated rationals p/q")
    p.set_defaults(func=cmd_evaluate)

    for name in ("verify", "probe"):
        p = sub.add_parser(name)
        p.add_argument("--chain", required=name == "verify")
        p.add_argument("--poly", required=True)
        p.add_argument("--mode", required=True,
                       choices=["containment", "coverage", "lemma52", "levelcurve"])
        p.add_argument("--target", choices=["complement", "interior-complement"],
                       default="complement")
        p.add_argument("--samples", type=int, default=10000)
        p.add_argument("--seed", type=int, required=True)
        p.add_argument("--window", default="20")
        p.add_argument("--domain-window", dest="domain_window", default=None)
        p.add_argument("--grid-step", dest="grid_step", default="1/4")
        p.add_argument("--strategy", choices=["uniform", "adaptive"], default="adaptive")
        p.add_argument("--min-coverage", dest="min_coverage", type=float, default=0.0)
        p.add_argument("--lambda", dest="lam", default="1")
        p.add_argument("--report")
        p.set_defaults(func=cmd_verify if name == "verify" else cmd_probe)

    p = sub.add_parser("plot-data", help="CSV of float image points")
    p.add_argument("--chain", required=True)
    p.add_argument("--poly", required=True)
    p.add_argument("--window", default="20")
    p.add_argument("--samples", type=int, default=20000)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_plot_data)
    return ap


def main(argv=None) -> int:
    _setup_threads()
    ap = build_parser()
    try:
        args = ap.parse_args(argv)
    except SystemExit as exc:
        return 1 if exc.code not in (0, None) else 0
    try:
        return args.func(args)
    except FileNotFoundError as exc:
        print(f"missing file: {exc.filename}", file=sys.stderr)
        return 1
    except (ValueError, KeyError) as exc:
        print(f"invalid input: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
