"""``cznd`` command line.

Exit codes: 0 success, 1 output file error, 2 usage error, 3 problem could
not be loaded, 4 every run failed numerically.
"""
from __future__ import annotations

import argparse
import logging
import sys

import numpy as np

from . import harness
from .errors import ComplexGainUnsupported, DimensionError, ParseError, ProblemFormatError, UsageError
from .models import MODEL_NAMES, Gain
from .ode import IntegratorConfig
from .problem import dumps, load_problem

EXIT_OK, EXIT_IO, EXIT_USAGE, EXIT_PROBLEM, EXIT_NUMERICAL = 0, 1, 2, 3, 4


def _gain(text: str) -> Gain:
    try:
        return Gain.parse(text)
    except ValueError as exc:
        raise argparse.ArgumentTypeError(f"invalid gain {text!r}: {exc}") from None


def _span(text: str) -> tuple[float, float]:
    try:
        a, b = (float(v) for v in text.split(":"))
    except ValueError:
        raise argparse.ArgumentTypeError(f"span must look like a:b, got {text!r}") from None
    if not b > a:
        raise argparse.ArgumentTypeError(f"span end must exceed start, got {text!r}")
    return a, b


def _common(p: argparse.ArgumentParser):
    p.add_argument("--problem", default="example3", help="path to a .tvp file or 'example3' (default)")
    p.add_argument("--span", type=_span, default=(0.0, 10.0), metavar="A:B", help="time span (default 0:10)")


def _experiment(p: argparse.ArgumentParser, out_default: str):
    _common(p)
    p.add_argument("--runs", type=int, default=8)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--init-range", type=float, default=5.0, help="X0 entries uniform in [-r, r]")
    p.add_argument("--rel-tol", type=float, default=1e-3)
    p.add_argument("--abs-tol", type=float, default=1e-6)
    p.add_argument("--samples", type=int, default=1000, help="uniform output samples per run")
    p.add_argument("--jobs", type=int, default=1, help="worker processes per batch")
    p.add_argument("--out", default=out_default, help=f"output path prefix (default {out_default})")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="cznd", description="ZND solvers for X F - A conj(X) = C")
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("run", help="integrate seeded runs of one model")
    _experiment(p, "results/run")
    p.add_argument("--model", choices=MODEL_NAMES, default="con-cznd1-conj")
    p.add_argument("--gamma", type=_gain, default=Gain(10.0))

    p = sub.add_parser("sweep-gamma", help="same initial states across several gains")
    _experiment(p, "results/sweep")
    p.add_argument("--model", choices=MODEL_NAMES, default="con-cznd1-conj")
    p.add_argument("--gamma", type=_gain, action="append", dest="gammas", help="repeat for each gain")

    p = sub.add_parser("compare", help="several models from shared initial states")
    _experiment(p, "results/compare")
    p.add_argument("--model", choices=MODEL_NAMES, action="append", dest="models", help="repeat for each model")
    p.add_argument("--gamma", type=_gain, default=Gain(10.0))

    p = sub.add_parser("check-uniqueness", help="grid check that the solution is unique")
    _common(p)
    p.add_argument("--grid", type=int, default=1001, help="number of grid points")
    p.add_argument("--out", default=None, help="write per-tau values to <out>_uniqueness.csv")

    p = sub.add_parser("print-problem", help="show the coefficient matrices")
    p.add_argument("--problem", default="example3")
    p.add_argument("--tau", type=float, default=0.0)
    return parser


def _spec(args, **extra) -> harness.ExperimentSpec:
    cfg = IntegratorConfig(rel_tol=args.rel_tol, abs_tol=args.abs_tol, sample_count=args.samples)
    try:
        cfg.validate(args.span[1] - args.span[0])
    except ValueError as exc:
        raise UsageError(str(exc)) from None
    return harness.ExperimentSpec(
        problem=args.problem,
        span=args.span,
        runs=args.runs,
        init_range=args.init_range,
        seed=args.seed,
        integrator=cfg,
        out=args.out,
        jobs=args.jobs,
        **extra,
    )


def _print_matrix(label: str, z: np.ndarray):
    print(f"{label} =")
    for row in z:
        print("  " + "  ".join(f"{v.real:+.6g}{v.imag:+.6g}i" for v in row))


def _print_problem(args) -> int:
    p = load_problem(args.problem)
    print(f"problem {p.name or args.problem}: m={p.m} n={p.n}, real dimension {p.dim}")
    print(f"tau = {args.tau:g}")
    for label, tm in (("F", p.F), ("A", p.A), ("C", p.C), ("X*", p.exact)):
        if tm is not None:
            _print_matrix(label, tm.value(args.tau))
    if p.exact is not None:
        res = np.linalg.norm(p.residual_matrix(args.tau, p.exact.value(args.tau)))
        print(f"|X* F - A conj(X*) - C|_F = {res:.3e}")
    try:
        text = dumps(p)
    except ValueError:
        return EXIT_OK
    print("\n# .tvp source")
    print(text, end="")
    return EXIT_OK


def _dispatch(args) -> int:
    if args.command == "print-problem":
        return _print_problem(args)
    if args.command == "check-uniqueness":
        if args.grid < 1:
            raise UsageError("--grid must be >= 1")
        rep = harness.check_uniqueness(args.problem, args.span, args.grid, args.out)
        print(harness.format_uniqueness(rep), end="")
        return EXIT_OK
    if args.command == "run":
        spec = _spec(args, model=args.model, gamma=args.gamma)
        report = harness.run(spec)
        print(harness.format_report(spec, report), end="")
        reports = [report]
    elif args.command == "sweep-gamma":
        spec = _spec(args, model=args.model)
        result = harness.gamma_sweep(spec, args.gammas or [])
        print(harness.format_sweep(spec, result), end="")
        reports = list(result.reports.values())
    else:
        models = args.models or ["con-cznd1", "con-cznd1-conj"]
        spec = _spec(args, model=models[0], gamma=args.gamma)
        result = harness.compare_models(spec, models)
        if len(models) == 1:
            print(harness.format_report(spec, result.reports[models[0]]), end="")
        else:
            print(harness.format_comparison(spec, result), end="")
        reports = list(result.reports.values())
    if harness.all_failed(reports):
        print("error: every run failed numerically", file=sys.stderr)
        return EXIT_NUMERICAL
    return EXIT_OK


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s: %(message)s")
    try:
        load_problem(args.problem)
    except (OSError, ParseError, ProblemFormatError, DimensionError) as exc:
        print(f"error: cannot load problem: {exc}", file=sys.stderr)
        return EXIT_PROBLEM
    try:
        return _dispatch(args)
    except ComplexGainUnsupported as exc:
        print(f"error: ComplexGainUnsupported: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except UsageError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_IO


if __name__ == "__main__":
    sys.exit(main())
