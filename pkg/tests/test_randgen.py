import json
import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy import stats

from randsat import (
    DimacsError,
    Formula,
    ModelParams,
    SeedSpec,
    count_solutions,
    decode_dimacs,
    derive_stream,
    encode_dimacs,
    generate_formula,
    log2_expected_solutions,
    sample_clause,
)
from randsat.randgen import SplitMix64, decode_json, encode_json, fmix64

M64 = (1 << 64) - 1


def ref_splitmix(state, count):
    """Textbook SplitMix64: state += golden, then the finalizer."""
    out = []
    for _ in range(count):
        state = (state + 0x9E3779B97F4A7C15) & M64
        z = state
        z = ((z ^ (z >> 30)) * 0xBF58476D1CE4E5B9) & M64
        z = ((z ^ (z >> 27)) * 0x94D049BB133111EB) & M64
        out.append(z ^ (z >> 31))
    return out


# ModelParams ---------------------------------------------------------------------

def test_params_defaults_and_derived():
    pr = ModelParams(10, 30, 0.1)
    assert pr.q == 0.1 and pr.unbiased
    assert pr.c == 3.0
    assert pr.kappa == pytest.approx(2.0)
    assert pr.x == pytest.approx(0.9**10)
    b = ModelParams(10, 30, 0.2, 0.1)
    assert b.alpha == pytest.approx(0.8 / 0.9)
    assert b.beta == pytest.approx(0.7 / 0.9)


@pytest.mark.parametrize("args", [(0, 1, 0.1), (3, -1, 0.1), (3, 1, -0.1), (3, 1, 0.6, 0.5), (3, 1.5, 0.1)])
def test_params_validation(args):
    with pytest.raises(ValueError):
        ModelParams(*args)


def test_from_density_rounds_half_to_even():
    assert ModelParams.from_density(2, 1.25, 0.1).m == 2
    assert ModelParams.from_density(2, 1.75, 0.1).m == 4
    assert ModelParams.from_density(10, 0.0, 0.1).m == 0


# streams -------------------------------------------------------------------------

def test_published_splitmix_vectors():
    r = SplitMix64(1234567)
    assert [r.next_u64() for _ in range(3)] == [
        6457827717110365317, 3203168211198807973, 9817491932198370423,
    ]


@pytest.mark.parametrize("seed", [SeedSpec(0, 0), SeedSpec(42, 7), SeedSpec(M64, M64)])
def test_stream_matches_reference(seed):
    key = fmix64(fmix64(seed.master_seed ^ ((seed.stream_index * 0x9E3779B97F4A7C15) & M64)))
    ref = ref_splitmix(key, 50)
    r = derive_stream(seed)
    head = [r.next_u64() for _ in range(20)]
    tail = r.u64_array(30).tolist()
    assert head + tail == ref


def test_random_array_matches_scalar():
    a, b = derive_stream(SeedSpec(5, 3)), derive_stream(SeedSpec(5, 3))
    vec = a.random_array(100)
    assert vec.tolist() == [b.random() for _ in range(100)]
    assert a.state == b.state


def test_stream_determinism_and_injectivity():
    assert derive_stream(SeedSpec(0, 0)) == derive_stream(SeedSpec(0, 0))
    assert derive_stream(SeedSpec(0, 0)) != derive_stream(SeedSpec(0, 1))
    keys = {derive_stream(SeedSpec(s, i)).key for s in range(20) for i in range(500)}
    assert len(keys) == 20 * 500


def test_seed_range():
    with pytest.raises(ValueError):
        SeedSpec(-1)
    with pytest.raises(ValueError):
        SeedSpec(0, 1 << 64)


def test_uniformity_chi_square():
    u = derive_stream(SeedSpec(42, 7)).random_array(10_000)
    assert u.min() >= 0 and u.max() < 1
    counts = np.histogram(u, bins=100, range=(0, 1))[0]
    assert stats.chisquare(counts).pvalue > 0.001


def test_streams_uncorrelated():
    a = derive_stream(SeedSpec(1, 0)).random_array(20_000)
    b = derive_stream(SeedSpec(1, 1)).random_array(20_000)
    r = np.corrcoef(a, b)[0, 1]
    assert abs(r) < 4 / math.sqrt(20_000)


# clause sampling -----------------------------------------------------------------

def test_sample_clause_extremes():
    rng = derive_stream(SeedSpec(3))
    for _ in range(50):
        assert len(sample_clause(ModelParams(6, 1, 0.0, 0.0), rng)) == 0
        assert len(sample_clause(ModelParams(6, 1, 0.5, 0.5), rng)) == 6


def within_3se(k, trials, prob):
    se = math.sqrt(trials * prob * (1 - prob))
    return abs(k - trials * prob) <= 3 * se


def test_slot_frequencies():
    params = ModelParams(10, 100_000, 0.25)
    f = generate_formula(params, SeedSpec(11))
    pos = np.array(f.pos_masks, dtype=np.uint64)
    neg = np.array(f.neg_masks, dtype=np.uint64)
    lengths = np.zeros(params.m)
    for s in range(10):
        ps = ((pos >> np.uint64(s)) & np.uint64(1)).astype(int)
        ns = ((neg >> np.uint64(s)) & np.uint64(1)).astype(int)
        assert within_3se(ps.sum(), params.m, 0.25)
        assert within_3se(ns.sum(), params.m, 0.25)
        lengths += ps + ns
    se = lengths.std(ddof=1) / math.sqrt(params.m)
    assert abs(lengths.mean() - 5.0) <= 3 * se


@pytest.mark.parametrize("p,q", [(0.2, 0.5), (0.1, 0.1), (0.6, 0.0)])
def test_single_variable_outcomes(p, q):
    f = generate_formula(ModelParams(1, 100_000, p, q), SeedSpec(17))
    pos = sum(f.pos_masks)
    neg = sum(f.neg_masks)
    assert within_3se(pos, f.m, p)
    assert within_3se(neg, f.m, q)
    assert within_3se(f.m - pos - neg, f.m, 1 - p - q)


def test_empty_clause_fraction():
    params = ModelParams(6, 50_000, 0.1, 0.15)
    f = generate_formula(params, SeedSpec(23))
    empty = sum(1 for a, b in zip(f.pos_masks, f.neg_masks) if not (a | b))
    assert within_3se(empty, params.m, (1 - 0.25) ** 6)


def test_negation_symmetry_at_p_equals_q():
    f = generate_formula(ModelParams(8, 10_000, 0.2), SeedSpec(31))
    pos = np.array([bin(a).count("1") for a in f.pos_masks])
    neg = np.array([bin(b).count("1") for b in f.neg_masks])
    # negating every literal swaps the two count vectors
    assert stats.ks_2samp(pos, neg).pvalue > 0.001
    diff = pos - neg
    assert abs(diff.mean()) <= 3 * diff.std(ddof=1) / math.sqrt(diff.size)


# formulas ------------------------------------------------------------------------

def test_generate_determinism():
    params = ModelParams(12, 40, 0.2, 0.1)
    f1 = generate_formula(params, SeedSpec(8, 2))
    f2 = generate_formula(params, SeedSpec(8, 2))
    assert f1 == f2
    assert encode_dimacs(f1, params, SeedSpec(8, 2)) == encode_dimacs(f2, params, SeedSpec(8, 2))
    assert f1 != generate_formula(params, SeedSpec(8, 3))


def test_generate_empty():
    assert generate_formula(ModelParams(4, 0, 0.3), SeedSpec(1)) == Formula(4)


def test_generate_wide_formula():
    f = generate_formula(ModelParams(100, 20, 0.05), SeedSpec(4))
    assert f.n == 100 and f.m == 20
    assert max(f.pos_masks) < 1 << 100


def test_mean_count_matches_first_moment():
    params = ModelParams(12, 121, 0.2)
    counts = np.array([count_solutions(generate_formula(params, SeedSpec(2718, i))) for i in range(10_000)])
    expected = 2.0 ** log2_expected_solutions(params)
    se = counts.std(ddof=1) / math.sqrt(counts.size)
    assert abs(counts.mean() - expected) <= 3 * se


# serialization -------------------------------------------------------------------

def test_dimacs_body_lines():
    f = Formula.from_literals(2, [[1, -2], []])
    lines = encode_dimacs(f).splitlines()
    assert lines[-3:] == ["p cnf 2 2", "1 -2 0", "0"]


def test_dimacs_metadata_comments():
    params = ModelParams(3, 2, 0.25, 0.125)
    text = encode_dimacs(generate_formula(params, SeedSpec(9, 4)), params, SeedSpec(9, 4))
    assert "c p = 0.25" in text and "c q = 0.125" in text
    assert "c master_seed = 9" in text and "c stream_index = 4" in text


def test_dimacs_round_trip_random():
    rng = np.random.default_rng(0)
    for i in range(100):
        n = int(rng.integers(1, 17))
        params = ModelParams(n, int(rng.integers(0, 40)), float(rng.uniform(0, 0.5)), float(rng.uniform(0, 0.5)))
        f = generate_formula(params, SeedSpec(77, i))
        assert decode_dimacs(encode_dimacs(f, params, SeedSpec(77, i))) == f


def test_dimacs_multiline_and_terminator():
    text = "c hi\np cnf 3 2\n1 -3\n 2 0 -1 0\n%\n0\n"
    assert decode_dimacs(text) == Formula.from_literals(3, [[1, -3, 2], [-1]])


@pytest.mark.parametrize(
    "text,line",
    [
        ("1 2 0\n", 1),
        ("p cnf 2\n", 1),
        ("p cnf 2 1\np cnf 2 1\n", 2),
        ("p cnf 2 1\n1 3 0\n", 2),
        ("p cnf 2 1\n1 x 0\n", 2),
        ("p cnf 2 1\n1 -1 0\n", 2),
        ("p cnf 2 1\n1 2\n", 2),
        ("p cnf 2 2\n1 2 0\n", 2),
        ("c only a comment\n", 1),
    ],
)
def test_dimacs_errors(text, line):
    with pytest.raises(DimacsError) as err:
        decode_dimacs(text)
    assert err.value.lineno == line


@given(st.integers(1, 16), st.integers(0, 30), st.integers(0, M64), st.integers(0, 1000))
@settings(max_examples=60, deadline=None)
def test_json_round_trip(n, m, master, index):
    params = ModelParams(n, m, 0.15, 0.2)
    seed = SeedSpec(master, index)
    f = generate_formula(params, seed)
    text = encode_json(f, params, seed)
    assert json.loads(text)["clauses"] == f.to_literals()
    assert decode_json(text) == (f, params, seed)
