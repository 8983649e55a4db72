"""Closed-form moments, bounds and critical densities of the random model.

Everything is evaluated in natural-log space (``log1p``/``expm1`` for
probabilities near 0 or 1, log-sum-exp over binomially weighted terms) and
converted to base 2 only at the surface.

Assignment coordinates follow the Kronecker convention: a slot holding the
positive literal satisfies a coordinate equal to +1, a slot holding the
negated literal satisfies a coordinate equal to -1. ``lam`` always counts
coordinates equal to -1.
"""

import math
from dataclasses import asdict, dataclass
from typing import Optional

import numpy as np
from scipy.special import gammaln, logsumexp, xlog1py, xlogy

from .randgen import ModelParams

LN2 = math.log(2.0)


def _log_comb(n, k):
    return gammaln(n + 1) - gammaln(k + 1) - gammaln(n - k + 1)


def _log1m(v):
    # log(1 - v), exact at v = 1
    return float(xlog1py(1, -v))


def _xpow(base_log1m, k):
    # (1 - r)^k given log1p(-r); 0^0 = 1
    with np.errstate(invalid="ignore"):
        return np.exp(np.where(k == 0, 0.0, k * base_log1m))


def _require_range(name, value, lo, hi):
    if not lo <= value <= hi:
        raise ValueError(f"{name}={value} outside [{lo}, {hi}]")


def _slot_logs(params):
    # log of the per-slot miss probabilities 1-p, 1-q, 1-p-q
    return _log1m(params.p), _log1m(params.q), _log1m(params.p + params.q)


def _pw(log_base, k):
    return 1.0 if k == 0 else math.exp(k * log_base)


def clause_sat_prob(params: ModelParams, lam: int) -> float:
    """Probability that a random clause is satisfied by a fixed assignment.

    ``lam`` is the number of the assignment's coordinates equal to -1. The
    clause fails only if every slot misses: probability ``1 - q`` at the -1
    coordinates and ``1 - p`` at the +1 ones.
    """
    n = params.n
    _require_range("lam", lam, 0, n)
    lp, lq, _ = _slot_logs(params)
    return 1.0 - _pw(lq, lam) * _pw(lp, n - lam)


def pair_sat_prob(
    params: ModelParams, sigma: int, lam: int, plus_mismatches: Optional[int] = None
) -> float:
    """Probability that a random clause satisfies both members of a pair.

    The pair differs in ``sigma`` coordinates and agrees on ``n - sigma``,
    ``lam`` of which are -1. ``plus_mismatches`` is how many of the
    ``sigma`` differing coordinates are +1 in the first assignment; the
    default ``sigma`` is the arrangement whose pair probability is
    ``1 - M {(1-p)^sigma + (1-q)^sigma - (1-p-q)^sigma}``. For ``p == q``
    the arrangement does not matter and the value is
    ``1 - 2(1-p)^n + (1-2p)^sigma (1-p)^(n-sigma)``.
    """
    n = params.n
    _require_range("sigma", sigma, 0, n)
    _require_range("lam", lam, 0, n - sigma)
    a = sigma if plus_mismatches is None else plus_mismatches
    _require_range("plus_mismatches", a, 0, sigma)
    lp, lq, lpq = _slot_logs(params)
    match = _pw(lq, lam) * _pw(lp, n - sigma - lam)
    either = _pw(lp, a) * _pw(lq, sigma - a) + _pw(lq, a) * _pw(lp, sigma - a) - _pw(lpq, sigma)
    return 1.0 - match * either


# first moment -------------------------------------------------------------

def _ln_en_unbiased(n, m, p):
    x = math.exp(xlog1py(n, -p))
    return n * LN2 + float(xlog1py(m, -x))


def _ln_en_biased(n, m, p, q):
    lam = np.arange(n + 1)
    fail = np.exp(xlog1py(lam, -q) + xlog1py(n - lam, -p))
    terms = _log_comb(n, lam) + xlog1py(m, -fail)
    return float(logsumexp(terms))


def _ln_en(params, form="auto"):
    n, m, p, q = params.n, params.m, params.p, params.q
    if form == "auto":
        form = "unbiased" if params.unbiased else "biased"
    if form == "unbiased":
        if not params.unbiased:
            raise ValueError("unbiased form requires p == q")
        return _ln_en_unbiased(n, m, p)
    if form == "biased":
        return _ln_en_biased(n, m, p, q)
    raise ValueError(f"unknown form {form!r}")


def log2_expected_solutions(params: ModelParams, form: str = "auto") -> float:
    """log2 E[N]; ``-inf`` when no assignment can satisfy a clause.

    ``form`` selects the closed form: ``"unbiased"`` (``p == q`` only),
    ``"biased"`` (sum over the number of -1 coordinates) or ``"auto"``.
    """
    return _ln_en(params, form) / LN2


# second moment ------------------------------------------------------------

def _ln_en2_unbiased(n, m, p):
    # sum over Hamming distance sigma of C(n, sigma) 2^n [1 - x(2 - beta^sigma)]^m
    x = math.exp(xlog1py(n, -p))
    beta = (1 - 2 * p) / (1 - p) if p < 1 else 0.0
    sigma = np.arange(n + 1)
    b_pow = np.exp(xlogy(sigma, beta))
    # equals 1 exactly when n = sigma = 1; clip the rounding excess
    fail_either = np.clip(x * (2.0 - b_pow), 0.0, 1.0)
    terms = _log_comb(n, sigma) + xlog1py(m, -fail_either)
    return n * LN2 + float(logsumexp(terms))


def _ln_en2_biased(n, m, p, q):
    # Ordered pairs classified by mismatches sigma, agreeing -1 coordinates lam
    # and the number a of mismatches where the first assignment is +1.
    lp = _log1m(p)
    lq = _log1m(q)
    lpq = _log1m(p + q)
    chunks = []
    for sigma in range(n + 1):
        lam = np.arange(n - sigma + 1)[:, None]
        a = np.arange(sigma + 1)[None, :]
        match = _xpow(lq, lam) * _xpow(lp, n - sigma - lam)
        either = (
            _xpow(lp, a) * _xpow(lq, sigma - a)
            + _xpow(lq, a) * _xpow(lp, sigma - a)
            - _xpow(lpq, np.full_like(a, sigma))
        )
        fail = np.clip(match * either, 0.0, 1.0)
        w = _log_comb(n, sigma) + _log_comb(n - sigma, lam) + _log_comb(sigma, a)
        chunks.append((w + xlog1py(m, -fail)).ravel())
    return float(logsumexp(np.concatenate(chunks)))


def _ln_en2_biased_single(n, m, p, q):
    # E[N] + 2 mu_2 with every pair of Hamming distance sigma >= 1 given the
    # pair probability of the a = sigma arrangement (exact only when p == q).
    lp = _log1m(p)
    lq = _log1m(q)
    lpq = _log1m(p + q)
    terms = [_ln_en_biased(n, m, p, q)]
    for sigma in range(1, n + 1):
        lam = np.arange(n - sigma + 1)
        match = _xpow(lq, lam) * _xpow(lp, n - sigma - lam)
        either = _xpow(lp, sigma) + _xpow(lq, sigma) - _xpow(lpq, sigma)
        fail = np.clip(match * either, 0.0, 1.0)
        w = LN2 * sigma + _log_comb(n, sigma) + _log_comb(n - sigma, lam)
        terms.extend(w + xlog1py(m, -fail))
    return float(logsumexp(terms))


def _ln_en2(params, form="auto"):
    n, m, p, q = params.n, params.m, params.p, params.q
    if form == "auto":
        form = "unbiased" if params.unbiased else "biased"
    if form == "unbiased":
        if not params.unbiased:
            raise ValueError("unbiased form requires p == q")
        return _ln_en2_unbiased(n, m, p)
    if form == "biased":
        return _ln_en2_biased(n, m, p, q)
    if form == "biased-single":
        return _ln_en2_biased_single(n, m, p, q)
    raise ValueError(f"unknown form {form!r}")


def log2_second_moment(params: ModelParams, form: str = "auto") -> float:
    """log2 E[N^2] as a sum of pair-satisfaction probabilities.

    ``form``: ``"unbiased"`` (``p == q``), ``"biased"`` (exact for any
    ``p, q``), ``"biased-single"`` (the double sum over ``sigma`` and ``lam``
    that treats every mismatch arrangement like ``a = sigma``; it agrees
    with the exact value at ``p == q`` and is kept for comparison), or
    ``"auto"``.
    """
    return _ln_en2(params, form) / LN2


def _delta_unbiased(n, m, p):
    # 2^-n sum C(n,s) ([1 + Y^2 (beta^s / x - 1)]^m - 1), split by sign so
    # that no 1 + delta cancellation is incurred.
    ln_x = xlog1py(n, -p)
    x = math.exp(ln_x)
    Y = x / (1 - x)
    beta = (1 - 2 * p) / (1 - p)
    sigma = np.arange(n + 1)
    g = np.maximum(Y * Y * np.expm1(xlogy(sigma, beta) - ln_x), -1.0)
    with np.errstate(over="ignore"):
        growth = np.expm1(xlog1py(m, g))
    w = _log_comb(n, sigma) - n * LN2
    pos = growth > 0
    neg = growth < 0
    total_pos = logsumexp(w[pos] + np.log(growth[pos])) if pos.any() else -np.inf
    total_neg = logsumexp(w[neg] + np.log(-growth[neg])) if neg.any() else -np.inf
    return float(np.exp(total_pos) - np.exp(total_neg))


def relative_variance(params: ModelParams, form: str = "auto") -> float:
    """delta N^2 = E[N^2] / E[N]^2 - 1.

    ``form="auto"`` uses the sign-split closed form when ``p == q`` and the
    moment ratio otherwise; ``"generic"`` forces the moment ratio.
    """
    ln1 = _ln_en(params)
    if ln1 == -math.inf:
        raise ValueError("relative variance undefined: E[N] = 0")
    if params.m == 0:
        return 0.0
    if form == "auto" and params.unbiased and params.p > 0:
        return max(_delta_unbiased(params.n, params.m, params.p), 0.0)
    if form not in ("auto", "generic"):
        raise ValueError(f"unknown form {form!r}")
    gap = _ln_en2(params) - 2 * ln1
    return math.inf if gap > 709.0 else max(math.expm1(gap), 0.0)


# reports ------------------------------------------------------------------

def _finite_or_none(v):
    return v if v is None or math.isfinite(v) else None


class _Report:
    def to_dict(self) -> dict:
        return {k: _finite_or_none(v) if isinstance(v, float) else v for k, v in asdict(self).items()}


@dataclass(frozen=True)
class MomentReport(_Report):
    log2_E_N: float
    log2_E_N2: float
    delta_sq: Optional[float]
    prob_lower: float
    prob_upper: float
    phi_ub: float


def phi_ub(n: int, p: float, c: float) -> float:
    """Upper-bound exponent 1 + c log2(1 - (1-p)^n) at real density ``c``."""
    x = math.exp(xlog1py(n, -p))
    return 1.0 + c * _log1m(x) / LN2


def sat_prob_bounds(params: ModelParams) -> MomentReport:
    """Second-moment lower bound and first-moment upper bound on prob(SAT)."""
    ln1 = _ln_en(params)
    log2_en = ln1 / LN2
    if ln1 == -math.inf:
        return MomentReport(log2_en, -math.inf, None, 0.0, 0.0, -math.inf)
    ln2 = _ln_en2(params)
    delta = relative_variance(params)
    if params.m == 0:
        lower = 1.0
    elif math.isfinite(delta):
        lower = 1.0 / (1.0 + delta)
    else:
        lower = math.exp(2 * ln1 - ln2)
    upper = math.exp(min(0.0, ln1))
    return MomentReport(
        log2_E_N=log2_en,
        log2_E_N2=ln2 / LN2,
        delta_sq=delta,
        prob_lower=min(lower, upper),
        prob_upper=upper,
        phi_ub=log2_en / params.n,
    )


@dataclass(frozen=True)
class CriticalDensities(_Report):
    c_ub: float
    c_cr: float
    c_cr_approx: float
    c_lb_biased: float
    c_ub_biased: float
    rel_gap: float
    c_mf: float
    condition34_max_p: float
    trivial_density: float
    strip_condition: bool


def critical_densities(params: ModelParams) -> CriticalDensities:
    """Transition densities for the parameters' ``n``, ``p`` and ``q``.

    ``strip_condition`` tells whether ``q <= p <= condition34_max_p``, the
    region where the lower density ``c_lb_biased`` is a proven bound.
    """
    n, p, q = params.n, params.p, params.q
    if p <= 0 or q <= 0:
        raise ValueError("critical densities diverge for p = 0 or q = 0")
    ln_x = float(xlog1py(n, -p))
    ln_y = float(xlog1py(n, -q))
    x = math.exp(ln_x)
    y = math.exp(ln_y)
    c_ub = -LN2 / _log1m(x) if x > 0 else 0.0
    max_p = -math.expm1(math.log1p(-q) + math.log1p(-y / 2) / n)
    if p + q < 1:
        trivial = math.exp(n * (math.log1p(-(p + q)) - math.log1p(-p)))
    else:
        trivial = 0.0
    return CriticalDensities(
        c_ub=c_ub,
        c_cr=LN2 * (1 - x) ** 2 / x if x > 0 else math.inf,
        c_cr_approx=LN2 * math.exp(params.kappa / 2),
        c_lb_biased=LN2 / y if y > 0 else math.inf,
        c_ub_biased=LN2 / x if x > 0 else math.inf,
        rel_gap=-math.expm1(ln_x - ln_y) + 0.0,
        c_mf=c_ub,
        condition34_max_p=max_p,
        trivial_density=trivial,
        strip_condition=bool(q <= p <= max_p),
    )


def critical_density(n: int, p: float) -> float:
    """c_cr = ln2 (1 - x)^2 / x for the unbiased model, x = (1-p)^n."""
    x = math.exp(xlog1py(n, -p))
    return LN2 * (1 - x) ** 2 / x


def scaling_function(t):
    """u(t) = 1 / (1 + 2^t), overflow-safe and vectorized."""
    t = np.asarray(t, dtype=float)
    out = np.exp(-np.logaddexp(0.0, t * LN2))
    return float(out) if out.ndim == 0 else out


def scaled_coordinate(n: int, c, c_cr: float):
    """-n (1 - c / c_cr)."""
    return -n * (1.0 - np.asarray(c, dtype=float) / c_cr)


def scaling_prob(params: ModelParams) -> float:
    """Finite-size scaling estimate u(-n (1 - c / c_cr)) of prob(SAT)."""
    if not params.unbiased:
        raise ValueError("the scaling form is only defined for p == q")
    if params.p <= 0:
        raise ValueError("the scaling form needs p > 0")
    c_cr = critical_density(params.n, params.p)
    return scaling_function(float(scaled_coordinate(params.n, params.c, c_cr)))


@dataclass(frozen=True)
class MeanFieldResult(_Report):
    prob: float
    psi: float
    log2_psi: float
    c_mf: float


def mean_field_prob(params: ModelParams) -> MeanFieldResult:
    """prob_mf = 1 - (1 - s)^(2^n) with s = (1 - (1-p)^n)^m.

    Neglects correlations between assignments; ``psi = 2^n s``.
    """
    if not params.unbiased:
        raise ValueError("the mean-field form is only defined for p == q")
    n, m, p = params.n, params.m, params.p
    x = math.exp(xlog1py(n, -p))
    ln_s = float(xlog1py(m, -x))
    log2_psi = n + ln_s / LN2
    c_mf = -LN2 / _log1m(x) if 0 < x < 1 else (math.inf if x == 0 else 0.0)
    if ln_s == 0.0:
        return MeanFieldResult(1.0, 2.0**n if n < 1024 else math.inf, log2_psi, c_mf)
    if ln_s == -math.inf:
        return MeanFieldResult(0.0, 0.0, log2_psi, c_mf)
    s = math.exp(ln_s)
    # log(-log1p(-s)); for tiny s the leading term log(s) is exact to O(s)
    ln_l = math.log(-math.log1p(-s)) if s > 1e-12 else ln_s + s / 2
    ln_tl = n * LN2 + ln_l
    prob = -math.expm1(-math.exp(ln_tl)) if ln_tl < 710 else 1.0
    psi = math.exp(log2_psi * LN2) if log2_psi * LN2 < 709 else math.inf
    return MeanFieldResult(prob, psi, log2_psi, c_mf)


@dataclass(frozen=True)
class KSatReference(_Report):
    K: int
    c_cr_K: float
    c_cr_K_asymptote: float
    pair_prob_ksat: Optional[float]
    pair_prob_unrestricted_shape: Optional[float]


def ksat_reference(
    K: int, n: Optional[int] = None, sigma: Optional[int] = None, p: Optional[float] = None
) -> KSatReference:
    """First-moment K-SAT threshold and the pair-probability profiles.

    With ``n`` and ``sigma`` given, ``pair_prob_ksat`` is
    ``1 - 2x + x ((n - sigma)/n)^K`` with ``x = 2^-K``; with ``p`` also
    given, ``pair_prob_unrestricted_shape`` is ``1 - 2x' + x' beta^sigma``
    with ``x' = (1-p)^n``.
    """
    if K < 1:
        raise ValueError(f"K must be >= 1, got {K}")
    x = 2.0**-K
    pair_k = pair_u = None
    if n is not None:
        if K > n:
            raise ValueError(f"K={K} exceeds n={n}")
        if sigma is None:
            raise ValueError("sigma is required with n")
        _require_range("sigma", sigma, 0, n)
        pair_k = 1 - 2 * x + x * ((n - sigma) / n) ** K
        if p is not None:
            _require_range("p", p, 0.0, 0.5)
            xp = math.exp(xlog1py(n, -p))
            beta = (1 - 2 * p) / (1 - p)
            pair_u = 1 - 2 * xp + xp * (beta**sigma if sigma else 1.0)
    return KSatReference(
        K=K,
        c_cr_K=-LN2 / math.log1p(-x),
        c_cr_K_asymptote=2.0**K * LN2,
        pair_prob_ksat=pair_k,
        pair_prob_unrestricted_shape=pair_u,
    )


@dataclass(frozen=True)
class SampleSpaceReport(_Report):
    n: int
    K: int
    log2_v_min: int
    log2_v_ksat: int


def sample_space_report(n: int, K: int) -> SampleSpaceReport:
    """log2 sizes: 2^n for all solution sets, C(n, K) for K-SAT formulas."""
    if not 1 <= K <= n:
        raise ValueError(f"need 1 <= K <= n, got K={K}, n={n}")
    return SampleSpaceReport(n, K, 1 << n, math.comb(n, K))
