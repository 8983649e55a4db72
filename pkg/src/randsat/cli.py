"""Command-line interface: ``randsat <subcommand> [flags]``.

Exit status is 0 on success, 2 on usage errors and 1 on runtime errors.
Randomized subcommands require an explicit ``--seed``.
"""

import argparse
import json
import sys

import numpy as np

from . import analytics, experiments
from .core import CapacityError
from .randgen import ModelParams, SeedSpec, encode_dimacs, encode_json, generate_formula

PROG = "randsat"


class UsageError(Exception):
    pass


def _float_list(text):
    try:
        return [float(v) for v in text.split(",") if v.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated numbers, got {text!r}") from None


def _int_list(text):
    try:
        return [int(v) for v in text.split(",") if v.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated integers, got {text!r}") from None


def _seed(text):
    v = int(text, 0)
    if not 0 <= v < 2**64:
        raise argparse.ArgumentTypeError("seed must be in [0, 2^64)")
    return v


def _add_model_flags(ap):
    ap.add_argument("--n", type=int, required=True, help="n: number of variables")
    g = ap.add_mutually_exclusive_group(required=True)
    g.add_argument("--m", type=int, help="m: number of clauses")
    g.add_argument("--c", type=float, help="c = m/n: clause density (m rounded half to even)")
    _add_literal_flags(ap)


def _add_literal_flags(ap):
    ap.add_argument("--p", type=float, help="p: probability that a clause contains a variable positively")
    ap.add_argument("--q", type=float, help="q: probability of the negated literal (default: q = p)")
    ap.add_argument("--kappa", type=float, help="kappa = 2pn: mean clause length; sets p = q = kappa/(2n)")
    ap.add_argument("--x", type=float, help="x = (1-p)^n; sets p = q = 1 - x^(1/n)")


def _literal_probs(args):
    given = [name for name in ("p", "kappa", "x") if getattr(args, name) is not None]
    if len(given) != 1:
        raise UsageError("give exactly one of --p, --kappa, --x")
    if args.q is not None and args.p is None:
        raise UsageError("--q requires --p")
    if args.p is not None:
        return args.p, args.q if args.q is not None else args.p
    if args.kappa is not None:
        p = args.kappa / (2 * args.n)
        return p, p
    if not 0 < args.x < 1:
        raise UsageError("--x must lie in (0, 1)")
    p = experiments.p_for_x(args.n, args.x)
    return p, p


def _check_model(n, p, q):
    try:
        ModelParams(n, 0, p, q)
    except ValueError as exc:
        raise UsageError(str(exc)) from None


def _model(args):
    p, q = _literal_probs(args)
    try:
        if args.m is not None:
            return ModelParams(args.n, args.m, p, q)
        return ModelParams.from_density(args.n, args.c, p, q)
    except ValueError as exc:
        raise UsageError(str(exc)) from None


def _json_text(obj):
    return json.dumps(experiments._json_safe(obj), indent=2) + "\n"


def _emit(args, text):
    if args.output:
        with open(args.output, "w", encoding="utf-8", newline="\n") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)


def _read(path):
    if path == "-":
        return sys.stdin.read()
    with open(path, encoding="utf-8") as fh:
        return fh.read()


def cmd_gen(args):
    params = _model(args)
    seed = SeedSpec(args.seed, args.index)
    formula = generate_formula(params, seed)
    if args.format == "dimacs":
        return encode_dimacs(formula, params, seed)
    return encode_json(formula, params, seed) + "\n"


def cmd_analytic(args):
    params = _model(args)
    out = {"params": params.to_dict(), "c": params.c, "x": params.x, "kappa": params.kappa}
    out.update(analytics.sat_prob_bounds(params).to_dict())
    if params.p > 0 and params.q > 0:
        out.update(analytics.critical_densities(params).to_dict())
    if params.unbiased and params.p > 0:
        out["scaling_prob"] = analytics.scaling_prob(params)
        out["mean_field_prob"] = analytics.mean_field_prob(params).prob
    return _json_text(out)


def _grid(args, n, p):
    if args.c_grid is not None:
        grid = list(args.c_grid)
    else:
        if None in (args.c_min, args.c_max):
            raise UsageError("give --c-grid or both --c-min and --c-max")
        grid = list(np.linspace(args.c_min, args.c_max, args.steps))
    if args.relative:
        c_cr = analytics.critical_density(n, p)
        grid = [c * c_cr for c in grid]
    if any(b < a for a, b in zip(grid, grid[1:])):
        raise UsageError("the density grid must be ascending")
    return grid


def cmd_sweep(args):
    p, q = _literal_probs(args)
    _check_model(args.n, p, q)
    if args.trials < 1:
        raise UsageError("--trials must be >= 1")
    grid = _grid(args, args.n, p)
    sweep = experiments.run_sweep(
        args.n, p, q, grid, args.trials, args.seed, mode=args.mode, workers=args.workers
    )
    if args.format == "json":
        return _json_text(sweep.to_dict())
    return sweep.to_csv()


def cmd_threshold(args):
    sweep = experiments.SweepResult.from_csv(_read(args.input))
    fit = experiments.estimate_threshold(sweep, use_actual_m=not args.nominal)
    out = fit.to_dict()
    if sweep.p == sweep.q and sweep.p > 0:
        out["c_cr"] = analytics.critical_density(sweep.n, sweep.p)
    return _json_text(out)


def cmd_collapse(args):
    sweeps = [experiments.SweepResult.from_csv(_read(path)) for path in args.input]
    return _json_text(experiments.collapse_check(sweeps, window=args.window).to_dict())


def cmd_audit(args):
    qs = args.q
    if qs is not None and len(qs) != len(args.p):
        raise UsageError("--q needs one value per --p value")
    if args.trials < 1:
        raise UsageError("--trials must be >= 1")
    for n in args.n:
        for i, p in enumerate(args.p):
            _check_model(n, p, p if qs is None else qs[i])
    grid = experiments.audit_grid(args.n, args.p, args.c_factors, qs)
    report = experiments.bounds_audit(
        grid, args.trials, args.seed, mode=args.mode, workers=args.workers, confidence=args.confidence
    )
    return report.to_json()


def cmd_ksat_ref(args):
    return _json_text(analytics.ksat_reference(args.k, args.n, args.sigma, args.p).to_dict())


def cmd_sample_space(args):
    return _json_text(analytics.sample_space_report(args.n, args.k).to_dict())


def _add_run_flags(ap):
    ap.add_argument("--trials", type=int, required=True, help="independent formulas per grid point")
    ap.add_argument("--seed", type=_seed, required=True, help="master seed (mandatory, no clock seeding)")
    ap.add_argument("--mode", choices=("auto", "count", "decide"), default="auto",
                    help="count = exhaustive #SAT, decide = DPLL; auto counts for n <= 20")
    ap.add_argument("--workers", type=int, default=None,
                    help="worker processes (default: CPU count); never changes the output")
    ap.add_argument("--output", "-o", help="output file (default: stdout)")


def build_parser():
    parser = argparse.ArgumentParser(prog=PROG, description="Random unrestricted CNF: analytics and experiments.")
    sub = parser.add_subparsers(dest="command", required=True)

    ap = sub.add_parser("gen", help="emit one random instance")
    _add_model_flags(ap)
    ap.add_argument("--seed", type=_seed, required=True, help="master seed")
    ap.add_argument("--index", type=_seed, default=0, help="stream index (trial number)")
    ap.add_argument("--format", choices=("dimacs", "json"), default="dimacs")
    ap.add_argument("--output", "-o")
    ap.set_defaults(func=cmd_gen)

    ap = sub.add_parser("analytic", help="moments, sandwich bounds and critical densities as JSON")
    _add_model_flags(ap)
    ap.add_argument("--output", "-o")
    ap.set_defaults(func=cmd_analytic)

    ap = sub.add_parser("sweep", help="empirical prob(SAT) over a density grid")
    ap.add_argument("--n", type=int, required=True, help="n: number of variables")
    _add_literal_flags(ap)
    ap.add_argument("--c-grid", type=_float_list, help="c: comma-separated ascending densities m/n")
    ap.add_argument("--c-min", type=float, help="c: smallest density")
    ap.add_argument("--c-max", type=float, help="c: largest density")
    ap.add_argument("--steps", type=int, default=11, help="grid points between --c-min and --c-max")
    ap.add_argument("--relative", action="store_true", help="grid values are multiples of c_cr")
    ap.add_argument("--format", choices=("csv", "json"), default="csv")
    _add_run_flags(ap)
    ap.set_defaults(func=cmd_sweep)

    ap = sub.add_parser("threshold", help="fit the transition location to a sweep CSV")
    ap.add_argument("--input", "-i", default="-", help="sweep CSV (default: stdin)")
    ap.add_argument("--nominal", action="store_true", help="fit nominal c instead of realised m/n")
    ap.add_argument("--output", "-o")
    ap.set_defaults(func=cmd_threshold)

    ap = sub.add_parser("collapse", help="finite-size collapse of sweeps with equal x = (1-p)^n")
    ap.add_argument("--input", "-i", nargs="+", required=True, help="sweep CSV files")
    ap.add_argument("--window", type=float, default=None, help="only compare points with |x~| <= window")
    ap.add_argument("--output", "-o")
    ap.set_defaults(func=cmd_collapse)

    ap = sub.add_parser("audit", help="check empirical prob(SAT) against the moment bounds")
    ap.add_argument("--n", type=_int_list, required=True, help="n: comma-separated variable counts")
    ap.add_argument("--p", type=_float_list, required=True, help="p: comma-separated literal probabilities")
    ap.add_argument("--q", type=_float_list, help="q: negated-literal probability per --p value (default q = p)")
    ap.add_argument("--c-factors", type=_float_list, default=[0.5, 1.0, 1.5],
                    help="c / c_cr multiples to test (default 0.5,1,1.5)")
    ap.add_argument("--confidence", type=float, default=0.997, help="Wilson interval confidence")
    _add_run_flags(ap)
    ap.set_defaults(func=cmd_audit)

    ap = sub.add_parser("ksat-ref", help="K-SAT first-moment reference values")
    ap.add_argument("--k", type=int, required=True, help="K: literals per clause")
    ap.add_argument("--n", type=int, help="n: variables (for the pair profile)")
    ap.add_argument("--sigma", type=int, help="sigma: Hamming distance of the pair")
    ap.add_argument("--p", type=float, help="p: literal probability for the unrestricted profile")
    ap.add_argument("--output", "-o")
    ap.set_defaults(func=cmd_ksat_ref)

    ap = sub.add_parser("sample-space", help="log2 sizes of formula sample spaces")
    ap.add_argument("--n", type=int, required=True, help="n: number of variables")
    ap.add_argument("--k", type=int, required=True, help="K: literals per K-SAT clause")
    ap.add_argument("--output", "-o")
    ap.set_defaults(func=cmd_sample_space)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        text = args.func(args)
    except UsageError as exc:
        parser.error(str(exc))
    except (CapacityError, ValueError, OSError) as exc:
        print(f"{PROG}: error: {exc}", file=sys.stderr)
        return 1
    _emit(args, text)
    return 0


if __name__ == "__main__":
    sys.exit(main())
