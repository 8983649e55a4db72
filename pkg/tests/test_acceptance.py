"""Acceptance suite: one test per criterion, each printing a PASS/FAIL line.

Run with ``pytest tests/test_acceptance.py -v`` (the lines are repeated in
the terminal summary) or directly with ``python3 tests/test_acceptance.py``.
Tolerances are the stated ones; nothing here is tuned to the outcome.
"""

import functools
import io
import math
import os
import sys
import time
from contextlib import redirect_stdout
from fractions import Fraction

import numpy as np

sys.path.insert(0, os.path.dirname(__file__))

from acceptance_report import record  # noqa: E402
from oracles import exact_moments  # noqa: E402
from randsat import (  # noqa: E402
    ModelParams,
    SweepResult,
    bounds_audit,
    clause_sat_prob,
    collapse_check,
    critical_densities,
    estimate_threshold,
    ksat_reference,
    log2_expected_solutions,
    log2_second_moment,
    mean_field_prob,
    pair_sat_prob,
    relative_variance,
    run_sweep,
)
from randsat.analytics import critical_density, scaling_function  # noqa: E402
from randsat.cli import main as cli_main  # noqa: E402
from randsat.experiments import SweepPoint, iso_x_grid, p_for_x, wilson_interval  # noqa: E402

# ln2 (1 - x)^2 / x at n = 14, x = 0.05, from 50-digit evaluation
C_CR_14 = 12.511306609107012835
# n = 12, q = 0.15 strip values from 50-digit evaluation
MAX_P_12 = 0.15520981561161833260
C_LB_12 = 4.8730217800696570910

SEEDS = {3: 30_003, 4: 40_004, 6: 60_006, 7: 70_007, 8: 80_008}


def rel(a, b):
    return abs(a - b) / abs(b) if b else abs(a)


# 1 ---------------------------------------------------------------------------------

def criterion_1():
    k3 = ksat_reference(3).c_cr_K
    k10 = ksat_reference(10).c_cr_K
    target = 2**10 * math.log(2)
    ok = abs(k3 - 5.19089) <= 1e-4 and rel(k10, target) <= 1e-3
    return ok, f"c_cr(3) = {k3:.6f} (want 5.19089 +- 1e-4); c_cr(10) = {k10:.3f}, {rel(k10, target):.2e} from 2^10 ln2"


# 2 ---------------------------------------------------------------------------------

def criterion_2():
    grid = [0.0, 0.1, 0.25, 0.4, 0.5]
    worst_moment = worst_delta = 0.0
    elapsed = 0.0
    cases = 0
    for n in (1, 2):
        for m in (0, 1, 2):
            for p in grid:
                for q in grid:
                    e1, e2 = exact_moments(n, m, Fraction(p), Fraction(q))
                    params = ModelParams(n, m, p, q)
                    t0 = time.perf_counter()
                    l1 = log2_expected_solutions(params)
                    l2 = log2_second_moment(params)
                    delta = relative_variance(params) if e1 else None
                    elapsed += time.perf_counter() - t0
                    cases += 1
                    if e1 == 0:
                        if l1 != -math.inf or l2 != -math.inf:
                            worst_moment = math.inf
                        continue
                    for got, exact in ((l1, e1), (l2, e2)):
                        want = math.log2(exact)
                        err = max(rel(2.0**got, float(exact)), abs(got - want) / max(1.0, abs(want)))
                        worst_moment = max(worst_moment, err)
                    want_d = float(e2 / (e1 * e1) - 1)
                    worst_delta = max(worst_delta, abs(delta - want_d) / max(1.0, abs(want_d)))
    ok = worst_moment <= 1e-12 and worst_delta <= 1e-9 and elapsed < 1.0
    return ok, (f"{cases} cases; worst moment rel err {worst_moment:.1e} (<= 1e-12), "
                f"worst delta err {worst_delta:.1e} (<= 1e-9), analytic time {elapsed:.3f}s")


# 3 ---------------------------------------------------------------------------------

def audit_grid_25():
    ps, fs = (0.15, 0.25, 0.35), (0.5, 1.0, 1.5)
    grid = []
    for i in range(25):
        n, p, f = 8 + i % 7, ps[i % 3], fs[(i // 3) % 3]
        grid.append(ModelParams.from_density(n, f * critical_density(n, p), p))
    return grid


def criterion_3():
    t0 = time.perf_counter()
    rep = bounds_audit(audit_grid_25(), 2000, SEEDS[3], confidence=0.997)
    bad = [(pt.n, pt.p, pt.m) for pt in rep.points if pt.violation]
    return rep.violations == 0, (f"{len(rep.points)} points x 2000 trials, {rep.violations} violations {bad} "
                                 f"({time.perf_counter() - t0:.0f}s)")


# 4 and 5 -------------------------------------------------------------------------------

@functools.lru_cache(maxsize=None)
def transition_sweep():
    n = 14
    p = p_for_x(n, 0.05)
    c_cr = critical_density(n, p)
    factors = [round(0.5 + 0.1 * k, 1) for k in range(11)]
    t0 = time.perf_counter()
    sweep = run_sweep(n, p, None, [f * c_cr for f in factors], 500, SEEDS[4])
    return sweep, factors, c_cr, time.perf_counter() - t0


def criterion_4():
    sweep, factors, c_cr, secs = transition_sweep()
    at = dict(zip(factors, sweep.points))
    lo, hi = at[0.7].p_hat, at[1.4].p_hat
    ok_cr = rel(c_cr, C_CR_14) <= 1e-9
    ok = ok_cr and lo >= 0.8 and hi <= 0.2
    return ok, (f"c_cr = {c_cr:.4f} (oracle {C_CR_14:.4f}); p_hat(0.7 c_cr) = {lo:.3f} (want >= 0.8), "
                f"p_hat(1.4 c_cr) = {hi:.3f} (want <= 0.2); 500 trials/point ({secs:.0f}s)")


def synthetic_sweep(c_star=10.0, gamma_star=1.4, trials=10_000, seed=5):
    n = 1000
    rng = np.random.default_rng(seed)
    points = []
    for c in np.linspace(7, 13, 13):
        m = int(round(c * n))
        sat = int(rng.binomial(trials, scaling_function(gamma_star * (m / n - c_star))))
        lo, hi = wilson_interval(sat, trials)
        points.append(SweepPoint(float(c), m, trials, sat, sat / trials, lo, hi))
    return SweepResult(n, 0.01, 0.01, "count", seed, tuple(points))


def criterion_5():
    sweep, _, c_cr, _ = transition_sweep()
    fit = estimate_threshold(sweep)
    real_err = rel(fit.c_hat, c_cr)
    syn = estimate_threshold(synthetic_sweep())
    syn_err = rel(syn.c_hat, 10.0)
    ok = real_err <= 0.05 and syn_err <= 0.02
    return ok, (f"real c_hat = {fit.c_hat:.3f} +- {fit.stderr_c:.3f} vs c_cr {c_cr:.3f} "
                f"({100 * real_err:.1f}%, want <= 5%); synthetic c_hat = {syn.c_hat:.4f} "
                f"({100 * syn_err:.2f}%, want <= 2%)")


# 6 ---------------------------------------------------------------------------------

def criterion_6():
    sweeps = []
    t0 = time.perf_counter()
    for n in (10, 12, 14):
        p = p_for_x(n, 0.05)
        sweeps.append(run_sweep(n, p, None, iso_x_grid(n, 0.05, -5, 5, 21), 500, SEEDS[6] + n))
    rep = collapse_check(sweeps, window=5.0)
    per = ", ".join(f"n={d['n']}: {d['max_dev_from_u']:.3f}" for d in rep.per_sweep)
    ok = rep.max_dev_from_u <= 0.15
    return ok, f"max |p_hat - u| for |x~| <= 5: {per} (want <= 0.15) ({time.perf_counter() - t0:.0f}s)"


# 7 ---------------------------------------------------------------------------------

def criterion_7():
    n, q = 12, 0.15
    p = critical_densities(ModelParams(n, 1, q, q)).condition34_max_p
    dens = critical_densities(ModelParams(n, 1, p, q))
    c_lb, c_ub = dens.c_lb_biased, dens.c_ub_biased
    grid = [1.0 + 0.5 * k for k in range(15)]
    sweep = run_sweep(n, p, q, grid, 500, SEEDS[7])
    fit = estimate_threshold(sweep)
    half_y = 0.5 * (1 - q) ** n
    ratio = dens.rel_gap / half_y
    ok_values = rel(p, MAX_P_12) <= 1e-9 and rel(c_lb, C_LB_12) <= 1e-9
    ok_fit = 0.9 * c_lb <= fit.c_hat <= 1.1 * c_ub
    ok_gap = 0.5 <= ratio <= 2.0
    ok = ok_values and ok_fit and ok_gap
    return ok, (f"p = {p:.4f}, c_lb = {c_lb:.3f}, c_ub = {c_ub:.3f}; fitted c_hat = {fit.c_hat:.3f} "
                f"+- {fit.stderr_c:.3f} (want [{0.9 * c_lb:.3f}, {1.1 * c_ub:.3f}]); "
                f"rel_gap / (1/2)(1-q)^n = {ratio:.3f} (want [0.5, 2])")


# 8 ---------------------------------------------------------------------------------

def cli_bytes(argv):
    buf = io.StringIO()
    with redirect_stdout(buf):
        code = cli_main(argv)
    return code, buf.getvalue().encode()


def criterion_8():
    sweep = ["sweep", "--n", "12", "--x", "0.05", "--c-min", "0.5", "--c-max", "1.5", "--steps", "11",
             "--relative", "--trials", "400", "--seed", str(SEEDS[8])]
    audit = ["audit", "--n", "8,10,12", "--p", "0.15,0.35", "--trials", "400", "--seed", str(SEEDS[8])]
    outputs = {}
    for name, argv in (("sweep", sweep), ("audit", audit)):
        for workers in ("1", "2", "3"):
            for repeat in range(2):
                outputs.setdefault(name, set()).add(cli_bytes(argv + ["--workers", workers]))
    ok = all(len(v) == 1 and next(iter(v))[0] == 0 for v in outputs.values())
    sizes = {k: len(next(iter(v))[1]) for k, v in outputs.items()}
    return ok, f"distinct outputs over workers 1/2/3 x 2 runs: " + ", ".join(
        f"{k}: {len(v)} ({sizes[k]} bytes)" for k, v in outputs.items())


# 9 ---------------------------------------------------------------------------------

def criterion_9():
    rng = np.random.default_rng(9)
    worst = 0.0
    for _ in range(50):
        n = int(rng.integers(1, 25))
        p = float(rng.uniform(0.01, 0.5))
        m = int(rng.integers(0, 2000))
        params = ModelParams(n, m, p, p)
        for fn, forms in ((log2_expected_solutions, ("biased",)),
                          (log2_second_moment, ("biased", "biased-single"))):
            ref = fn(params, form="unbiased")
            for form in forms:
                got = fn(params, form=form)
                worst = max(worst, abs(got - ref) / max(1.0, abs(ref)), rel(2.0**got, 2.0**ref))
    pair_ok = True
    for _ in range(50):
        n = int(rng.integers(1, 40))
        p, q = (float(v) for v in rng.uniform(0, 0.5, 2))
        params = ModelParams(n, 1, p, q)
        for lam in range(n + 1):
            pair_ok &= pair_sat_prob(params, 0, lam) == clause_sat_prob(params, lam)
    mf_ok = True
    for _ in range(100):
        n = int(rng.integers(1, 60))
        p = float(rng.uniform(0.005, 0.5))
        m = int(rng.integers(0, 20_000))
        mf = mean_field_prob(ModelParams(n, m, p))
        lo = mf.psi / (1 + mf.psi) if math.isfinite(mf.psi) else 1.0
        mf_ok &= lo - 1e-12 <= mf.prob <= min(1.0, mf.psi) + 1e-12
    ok = worst <= 1e-9 and pair_ok and mf_ok
    return ok, (f"worst biased-vs-unbiased rel err {worst:.1e} over 50 points (<= 1e-9); "
                f"pair(sigma=0) == clause: {pair_ok}; mean-field sandwich on 100 points: {mf_ok}")


# ---------------------------------------------------------------------------------

CRITERIA = {
    1: ("K-SAT reference values", criterion_1),
    2: ("brute-force oracle equivalence", criterion_2),
    3: ("sandwich audit", criterion_3),
    4: ("transition location", criterion_4),
    5: ("threshold fit", criterion_5),
    6: ("scaling collapse", criterion_6),
    7: ("biased strip", criterion_7),
    8: ("determinism", criterion_8),
    9: ("symmetry and reduction suite", criterion_9),
}


def check(number):
    title, fn = CRITERIA[number]
    ok, detail = fn()
    record(number, title, ok, detail)
    assert ok, detail


def test_criterion_1_ksat_reference():
    check(1)


def test_criterion_2_brute_force_equivalence():
    check(2)


def test_criterion_3_sandwich_audit():
    check(3)


def test_criterion_4_transition_location():
    check(4)


def test_criterion_5_threshold_fit():
    check(5)


def test_criterion_6_scaling_collapse():
    check(6)


def test_criterion_7_biased_strip():
    check(7)


def test_criterion_8_determinism():
    check(8)


def test_criterion_9_symmetry_and_reduction():
    check(9)


if __name__ == "__main__":
    failed = 0
    for number in CRITERIA:
        try:
            check(number)
        except AssertionError:
            failed += 1
    sys.exit(1 if failed else 0)
