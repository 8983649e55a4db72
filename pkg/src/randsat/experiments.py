"""Monte Carlo trials, density sweeps, threshold fits, collapse and audits.

Trial ``t`` of grid point ``i`` always uses stream index ``i * trials + t``
under the run's master seed, so results do not depend on how trials are
scheduled across workers.
"""

import csv
import io
import json
import math
import os
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field
from typing import List, Optional, Sequence

import numpy as np

from . import analytics
from .core import count_solutions, is_satisfiable
from .estimator import ThresholdLogistic
from .randgen import ModelParams, SeedSpec, generate_formula

COUNT_MODE_MAX_N = 20
BLOCK_SIZE = 256
SWEEP_COLUMNS = (
    "n", "p", "q", "c_nominal", "m", "trials", "sat_count",
    "p_hat", "ci_low", "ci_high", "mode", "master_seed",
)


def resolve_mode(n: int, mode: str = "auto") -> str:
    if mode == "auto":
        return "count" if n <= COUNT_MODE_MAX_N else "decide"
    if mode not in ("count", "decide"):
        raise ValueError(f"mode must be 'auto', 'count' or 'decide', got {mode!r}")
    return mode


def p_for_x(n: int, x: float) -> float:
    """Literal probability giving (1 - p)^n = x."""
    return -math.expm1(math.log(x) / n)


def wilson_interval(successes: int, trials: int, confidence: float = 0.95):
    """Wilson score interval, widened if needed to contain the point estimate."""
    from statsmodels.stats.proportion import proportion_confint

    lo, hi = proportion_confint(successes, trials, alpha=1 - confidence, method="wilson")
    p_hat = successes / trials
    return max(0.0, min(float(lo), p_hat)), min(1.0, max(float(hi), p_hat))


@dataclass(frozen=True)
class TrialRecord:
    seed: SeedSpec
    params: ModelParams
    mode: str
    satisfiable: bool
    solution_count: Optional[int]
    wall_time: float

    @property
    def verdict(self) -> str:
        return "SAT" if self.satisfiable else "UNSAT"


def run_trial(params: ModelParams, seed: SeedSpec, mode: str = "auto") -> TrialRecord:
    """Generate one formula and decide it (``count`` mode also counts)."""
    mode = resolve_mode(params.n, mode)
    start = time.perf_counter()
    formula = generate_formula(params, seed)
    if mode == "count":
        count = count_solutions(formula)
        sat = count > 0
    else:
        count = None
        sat = is_satisfiable(formula).satisfiable
    return TrialRecord(seed, params, mode, sat, count, time.perf_counter() - start)


def _run_block(task):
    params, master_seed, start, count, mode = task
    sat = 0
    for index in range(start, start + count):
        formula = generate_formula(params, SeedSpec(master_seed, index))
        if mode == "count":
            sat += count_solutions(formula) > 0
        else:
            sat += is_satisfiable(formula).satisfiable
    return sat


def default_workers() -> int:
    return os.cpu_count() or 1


def _sat_counts(jobs, master_seed, mode, workers):
    """SAT counts per ``(params, first_index, trials)`` job, in job order."""
    tasks, owner = [], []
    for j, (params, first, trials) in enumerate(jobs):
        for off in range(0, trials, BLOCK_SIZE):
            tasks.append((params, master_seed, first + off, min(BLOCK_SIZE, trials - off), mode))
            owner.append(j)
    if workers is None:
        workers = default_workers()
    if workers <= 1 or len(tasks) <= 1:
        results = map(_run_block, tasks)
    else:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            results = list(pool.map(_run_block, tasks))
    totals = [0] * len(jobs)
    for j, sat in zip(owner, results):
        totals[j] += int(sat)
    return totals


def _fmt(v):
    return repr(float(v))


@dataclass(frozen=True)
class SweepPoint:
    c: float
    m: int
    trials: int
    sat_count: int
    p_hat: float
    ci_low: float
    ci_high: float


@dataclass(frozen=True)
class SweepResult:
    n: int
    p: float
    q: float
    mode: str
    master_seed: int
    points: tuple

    @property
    def c(self) -> np.ndarray:
        return np.array([pt.c for pt in self.points])

    @property
    def actual_c(self) -> np.ndarray:
        return np.array([pt.m / self.n for pt in self.points])

    @property
    def p_hat(self) -> np.ndarray:
        return np.array([pt.p_hat for pt in self.points])

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(SWEEP_COLUMNS)
        for pt in self.points:
            w.writerow([
                self.n, _fmt(self.p), _fmt(self.q), _fmt(pt.c), pt.m, pt.trials, pt.sat_count,
                _fmt(pt.p_hat), _fmt(pt.ci_low), _fmt(pt.ci_high), self.mode, self.master_seed,
            ])
        return buf.getvalue()

    @classmethod
    def from_csv(cls, text: str) -> "SweepResult":
        rows = list(csv.DictReader(io.StringIO(text)))
        if not rows:
            raise ValueError("sweep CSV has no rows")
        missing = set(SWEEP_COLUMNS) - set(rows[0])
        if missing:
            raise ValueError(f"sweep CSV lacks columns {sorted(missing)}")
        first = rows[0]
        head = (int(first["n"]), float(first["p"]), float(first["q"]), first["mode"], int(first["master_seed"]))
        points = []
        for r in rows:
            if (int(r["n"]), float(r["p"]), float(r["q"]), r["mode"], int(r["master_seed"])) != head:
                raise ValueError("sweep CSV mixes runs with different n, p, q, mode or seed")
            points.append(SweepPoint(
                float(r["c_nominal"]), int(r["m"]), int(r["trials"]), int(r["sat_count"]),
                float(r["p_hat"]), float(r["ci_low"]), float(r["ci_high"]),
            ))
        return cls(*head, tuple(points))

    def to_dict(self) -> dict:
        d = asdict(self)
        d["points"] = [asdict(pt) for pt in self.points]
        return d


def run_sweep(
    n: int,
    p: float,
    q: Optional[float],
    c_grid: Sequence[float],
    trials: int,
    master_seed: int,
    mode: str = "auto",
    workers: Optional[int] = 1,
    confidence: float = 0.95,
) -> SweepResult:
    """Empirical prob(SAT) at each density of an ascending grid.

    ``m = round(c * n)`` (half to even); the realised ``m`` is recorded.
    """
    if trials < 1:
        raise ValueError("trials must be >= 1")
    c_grid = [float(c) for c in c_grid]
    if any(b < a for a, b in zip(c_grid, c_grid[1:])):
        raise ValueError("c_grid must be ascending")
    q = p if q is None else q
    mode = resolve_mode(n, mode)
    jobs = []
    for i, c in enumerate(c_grid):
        jobs.append((ModelParams.from_density(n, c, p, q), i * trials, trials))
    counts = _sat_counts(jobs, master_seed, mode, workers)
    points = []
    for (params, _, _), c, sat in zip(jobs, c_grid, counts):
        lo, hi = wilson_interval(sat, trials, confidence)
        points.append(SweepPoint(c, params.m, trials, sat, sat / trials, lo, hi))
    return SweepResult(n, float(p), float(q), mode, master_seed, tuple(points))


def iso_x_grid(n: int, x: float, t_min: float = -5.0, t_max: float = 5.0, steps: int = 21):
    """Densities ``c_cr (1 + t / n)`` for a uniform grid of scaled coordinates t."""
    c_cr = analytics.critical_density(n, p_for_x(n, x))
    return [c_cr * (1 + t / n) for t in np.linspace(t_min, t_max, steps)]


@dataclass(frozen=True)
class ThresholdFit:
    c_hat: float
    gamma_hat: float
    log_likelihood: float
    stderr_c: float
    stderr_gamma: float

    def to_dict(self) -> dict:
        return asdict(self)


def estimate_threshold(sweep: SweepResult, use_actual_m: bool = True) -> ThresholdFit:
    """Fit ``(1 + 2^(gamma (c - c_hat)))^-1`` to a sweep by binomial MLE.

    Starts from the grid point nearest ``p_hat = 1/2`` with slope ``n / c``
    there. Densities are the realised ``m / n`` unless ``use_actual_m`` is
    False.
    """
    c = sweep.actual_c if use_actual_m else sweep.c
    frac = sweep.p_hat
    trials = np.array([pt.trials for pt in sweep.points], dtype=float)
    order = np.lexsort((trials, frac, c))
    c, frac, trials = c[order], frac[order], trials[order]
    if np.all(frac == frac[0]) and frac[0] in (0.0, 1.0):
        raise ValueError("degenerate sweep: all points SAT or all UNSAT")
    i0 = int(np.argmin(np.abs(frac - 0.5)))
    c0 = float(c[i0])
    g0 = sweep.n / c0 if c0 > 0 else None
    est = ThresholdLogistic(c_init=c0, gamma_init=g0).fit(c, frac, sample_weight=trials)
    return ThresholdFit(est.c_hat_, est.gamma_hat_, est.log_likelihood_, est.stderr_c_, est.stderr_gamma_)


@dataclass(frozen=True)
class CollapseReport:
    window: Optional[float]
    x: float
    per_sweep: list
    pairwise: list
    max_dev_from_u: float
    max_mutual_dev: Optional[float]

    def to_dict(self) -> dict:
        return asdict(self)


def _scaled(sweep, c_cr):
    t = analytics.scaled_coordinate(sweep.n, sweep.actual_c, c_cr)
    order = np.argsort(t, kind="stable")
    return t[order], sweep.p_hat[order]


def collapse_check(sweeps: Sequence[SweepResult], window: Optional[float] = None, x_rtol: float = 1e-9):
    """Compare sweeps with each other and with u in the coordinate -n(1 - c/c_cr).

    All sweeps must be unbiased and share ``x = (1 - p)^n``. Only points with
    ``|t| <= window`` are compared when ``window`` is set.
    """
    if not sweeps:
        raise ValueError("need at least one sweep")
    xs = []
    for s in sweeps:
        if s.p != s.q:
            raise ValueError("collapse needs unbiased sweeps (p == q)")
        xs.append(math.exp(s.n * math.log1p(-s.p)))
    if any(abs(v - xs[0]) > x_rtol * xs[0] for v in xs):
        raise ValueError(f"sweeps have different x = (1-p)^n: {xs}")

    def keep(t):
        return np.ones_like(t, dtype=bool) if window is None else np.abs(t) <= window

    scaled = []
    per_sweep = []
    for s in sweeps:
        c_cr = analytics.critical_density(s.n, s.p)
        t, ph = _scaled(s, c_cr)
        k = keep(t)
        t, ph = t[k], ph[k]
        scaled.append((t, ph))
        dev = float(np.max(np.abs(ph - analytics.scaling_function(t)))) if t.size else 0.0
        per_sweep.append({"n": s.n, "c_cr": c_cr, "points": int(t.size), "max_dev_from_u": dev})

    pairwise = []
    for i in range(len(sweeps)):
        for j in range(i + 1, len(sweeps)):
            (ta, pa), (tb, pb) = scaled[i], scaled[j]
            if ta.size == 0 or tb.size == 0:
                continue
            lo, hi = max(ta[0], tb[0]), min(ta[-1], tb[-1])
            devs = []
            for t_own, p_own, t_other, p_other in ((ta, pa, tb, pb), (tb, pb, ta, pa)):
                inside = (t_own >= lo) & (t_own <= hi)
                if inside.any():
                    devs.append(np.abs(p_own[inside] - np.interp(t_own[inside], t_other, p_other)))
            dev = float(np.max(np.concatenate(devs))) if devs else None
            pairwise.append({"n_a": sweeps[i].n, "n_b": sweeps[j].n, "overlap": [float(lo), float(hi)],
                             "max_mutual_dev": dev})
    mutual = [d["max_mutual_dev"] for d in pairwise if d["max_mutual_dev"] is not None]
    return CollapseReport(
        window=window,
        x=xs[0],
        per_sweep=per_sweep,
        pairwise=pairwise,
        max_dev_from_u=max(d["max_dev_from_u"] for d in per_sweep),
        max_mutual_dev=max(mutual) if mutual else None,
    )


@dataclass(frozen=True)
class AuditPoint:
    n: int
    m: int
    p: float
    q: float
    mode: str
    trials: int
    sat_count: int
    p_hat: float
    ci_low: float
    ci_high: float
    prob_lower: float
    prob_upper: float
    violation: bool
    strip_condition: Optional[bool] = None
    c_lb_biased: Optional[float] = None
    c_ub_biased: Optional[float] = None
    ordering_ok: Optional[bool] = None


@dataclass(frozen=True)
class AuditReport:
    master_seed: int
    trials: int
    confidence: float
    mode: str
    points: list = field(default_factory=list)

    @property
    def violations(self) -> int:
        return sum(pt.violation for pt in self.points)

    def to_dict(self) -> dict:
        d = asdict(self)
        d["violations"] = self.violations
        return d

    def to_json(self) -> str:
        return json.dumps(_json_safe(self.to_dict()), indent=2) + "\n"


def _json_safe(obj):
    if isinstance(obj, float):
        return obj if math.isfinite(obj) else None
    if isinstance(obj, dict):
        return {k: _json_safe(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_json_safe(v) for v in obj]
    return obj


def audit_grid(ns, ps, c_factors, qs=None) -> List[ModelParams]:
    """Parameter grid with ``m = round(f * c_cr * n)`` for each factor f.

    ``c_cr = ln2 (1 - x)^2 / x`` with ``x = (1 - p)^n``; ``qs`` defaults to
    the unbiased choice ``q = p``.
    """
    grid = []
    for n in ns:
        for i, p in enumerate(ps):
            q = p if qs is None else qs[i]
            c_cr = analytics.critical_density(n, p)
            for f in c_factors:
                grid.append(ModelParams.from_density(n, f * c_cr, p, q))
    return grid


def bounds_audit(
    grid: Sequence[ModelParams],
    trials: int,
    master_seed: int,
    mode: str = "auto",
    workers: Optional[int] = 1,
    confidence: float = 0.997,
) -> AuditReport:
    """Check empirical prob(SAT) against the first/second-moment sandwich.

    A point is a violation when its Wilson interval at ``confidence`` misses
    ``[prob_lower, prob_upper]``. For ``p != q`` inside the strip where the
    lower density is proven, the ordering ``c_lb <= c_ub`` is also checked.
    """
    resolved = [resolve_mode(pr.n, mode) for pr in grid]
    counts = {}
    for run_mode in sorted(set(resolved)):
        idx = [i for i, r in enumerate(resolved) if r == run_mode]
        jobs = [(grid[i], i * trials, trials) for i in idx]
        counts.update(zip(idx, _sat_counts(jobs, master_seed, run_mode, workers)))

    points = []
    for i, pr in enumerate(grid):
        sat = counts[i]
        lo, hi = wilson_interval(sat, trials, confidence)
        bounds = analytics.sat_prob_bounds(pr)
        violation = hi < bounds.prob_lower or lo > bounds.prob_upper
        extra = {}
        if pr.p != pr.q and pr.p > 0 and pr.q > 0:
            dens = analytics.critical_densities(pr)
            extra = {"strip_condition": dens.strip_condition,
                     "c_lb_biased": dens.c_lb_biased, "c_ub_biased": dens.c_ub_biased}
            if dens.strip_condition:
                extra["ordering_ok"] = dens.c_lb_biased <= dens.c_ub_biased
                violation = violation or not extra["ordering_ok"]
        points.append(AuditPoint(
            pr.n, pr.m, pr.p, pr.q, resolved[i], trials, sat, sat / trials, lo, hi,
            bounds.prob_lower, bounds.prob_upper, bool(violation), **extra,
        ))
    return AuditReport(master_seed, trials, confidence, mode, points)
