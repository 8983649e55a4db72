"""Random formulas from the unrestricted clause model, with portable seeding.

Streams are SplitMix64 sequences keyed by ``(master_seed, stream_index)``,
implemented in pure 64-bit integer arithmetic so every platform and every
reimplementation produces the same bits:

    key    = fmix(fmix(master_seed ^ (stream_index * 0x9E3779B97F4A7C15)))
    out_k  = fmix(key + (k + 1) * 0x9E3779B97F4A7C15)        k = 0, 1, ...
    u_k    = (out_k >> 11) * 2**-53

where ``fmix`` is the SplitMix64 finalizer

    z ^= z >> 30; z *= 0xBF58476D1CE4E5B9
    z ^= z >> 27; z *= 0x94D049BB133111EB
    z ^= z >> 31

and all arithmetic is modulo 2**64. A clause consumes ``n`` consecutive
uniforms, one per variable in ascending order: ``u < p`` puts the positive
literal in, ``p <= u < p + q`` the negated one, anything else leaves the
variable out. A formula's clauses are drawn one after another from the same
stream.
"""

import json
import math
from dataclasses import dataclass
from typing import Optional

import numpy as np

from .core import Clause, Formula

GOLDEN = 0x9E3779B97F4A7C15
_MIX1 = 0xBF58476D1CE4E5B9
_MIX2 = 0x94D049BB133111EB
_M64 = (1 << 64) - 1


class DimacsError(ValueError):
    """Malformed DIMACS input; carries the offending line number."""

    def __init__(self, lineno, message):
        super().__init__(f"line {lineno}: {message}")
        self.lineno = lineno


@dataclass(frozen=True)
class ModelParams:
    """Configuration ``(n, m, p, q)`` of the random clause model.

    Each clause includes variable ``a_s`` with probability ``p``, its
    negation with probability ``q`` and neither with ``1 - p - q``,
    independently per variable. ``q`` defaults to ``p`` (unbiased model).
    """

    n: int
    m: int
    p: float
    q: Optional[float] = None

    def __post_init__(self):
        if self.q is None:
            object.__setattr__(self, "q", self.p)
        if not isinstance(self.n, (int, np.integer)) or self.n < 1:
            raise ValueError(f"n must be a positive integer, got {self.n!r}")
        if not isinstance(self.m, (int, np.integer)) or self.m < 0:
            raise ValueError(f"m must be a nonnegative integer, got {self.m!r}")
        object.__setattr__(self, "n", int(self.n))
        object.__setattr__(self, "m", int(self.m))
        object.__setattr__(self, "p", float(self.p))
        object.__setattr__(self, "q", float(self.q))
        if not (self.p >= 0 and self.q >= 0 and self.p + self.q <= 1):
            raise ValueError(
                f"need p >= 0, q >= 0 and p + q <= 1 (got p={self.p}, q={self.q})"
            )

    @classmethod
    def from_density(cls, n, c, p, q=None) -> "ModelParams":
        """Round ``c * n`` half-to-even to get the clause count."""
        return cls(n, int(round(c * n)), p, q)

    @property
    def unbiased(self) -> bool:
        return self.p == self.q

    @property
    def c(self) -> float:
        return self.m / self.n

    @property
    def x(self) -> float:
        """(1 - p)^n."""
        return math.exp(self.n * math.log1p(-self.p)) if self.p < 1 else 0.0

    @property
    def y(self) -> float:
        """(1 - q)^n."""
        return math.exp(self.n * math.log1p(-self.q)) if self.q < 1 else 0.0

    @property
    def alpha(self) -> float:
        return (1 - self.p) / (1 - self.q)

    @property
    def beta(self) -> float:
        return (1 - self.p - self.q) / (1 - self.q)

    @property
    def kappa(self) -> float:
        """Mean clause length (p + q) n."""
        return (self.p + self.q) * self.n

    def with_m(self, m) -> "ModelParams":
        return ModelParams(self.n, m, self.p, self.q)

    def to_dict(self) -> dict:
        return {"n": self.n, "m": self.m, "p": self.p, "q": self.q}


@dataclass(frozen=True)
class SeedSpec:
    master_seed: int
    stream_index: int = 0

    def __post_init__(self):
        for name in ("master_seed", "stream_index"):
            v = getattr(self, name)
            if not 0 <= v <= _M64:
                raise ValueError(f"{name} must fit in 64 unsigned bits, got {v}")
            object.__setattr__(self, name, int(v))


def fmix64(z: int) -> int:
    """SplitMix64 output finalizer on a Python int."""
    z &= _M64
    z = ((z ^ (z >> 30)) * _MIX1) & _M64
    z = ((z ^ (z >> 27)) * _MIX2) & _M64
    return z ^ (z >> 31)


def _fmix64_array(z):
    z = z ^ (z >> np.uint64(30))
    z = z * np.uint64(_MIX1)
    z = z ^ (z >> np.uint64(27))
    z = z * np.uint64(_MIX2)
    return z ^ (z >> np.uint64(31))


class SplitMix64:
    """Counter-based SplitMix64 stream; ``key`` plus draws consumed so far."""

    def __init__(self, key: int, position: int = 0):
        self.key = key & _M64
        self.position = position

    @property
    def state(self) -> tuple:
        return (self.key, self.position)

    def __eq__(self, other):
        return isinstance(other, SplitMix64) and self.state == other.state

    def __repr__(self):
        return f"SplitMix64(key={self.key:#018x}, position={self.position})"

    def next_u64(self) -> int:
        self.position += 1
        return fmix64(self.key + self.position * GOLDEN)

    def random(self) -> float:
        return (self.next_u64() >> 11) * 2.0**-53

    def u64_array(self, size: int) -> np.ndarray:
        k = np.arange(self.position + 1, self.position + size + 1, dtype=np.uint64)
        self.position += size
        return _fmix64_array(np.uint64(self.key) + k * np.uint64(GOLDEN))

    def random_array(self, size: int) -> np.ndarray:
        """``size`` uniforms in [0, 1), identical to repeated ``random()``."""
        return (self.u64_array(size) >> np.uint64(11)).astype(np.float64) * 2.0**-53


def derive_stream(seed: SeedSpec) -> SplitMix64:
    key = fmix64(fmix64(seed.master_seed ^ ((seed.stream_index * GOLDEN) & _M64)))
    return SplitMix64(key)


def _classify(u, p, q):
    pos = u < p
    neg = (u >= p) & (u < p + q)
    return pos, neg


def _pack_rows(bits: np.ndarray) -> list:
    n = bits.shape[1]
    if n <= 64:
        weights = np.left_shift(np.uint64(1), np.arange(n, dtype=np.uint64))
        return (bits.astype(np.uint64) * weights).sum(axis=1, dtype=np.uint64).tolist()
    packed = np.packbits(bits, axis=1, bitorder="little")
    return [int.from_bytes(row.tobytes(), "little") for row in packed]


def sample_clause(params: ModelParams, rng: SplitMix64) -> Clause:
    u = rng.random_array(params.n)
    pos, neg = _classify(u[None, :], params.p, params.q)
    return Clause(_pack_rows(pos)[0], _pack_rows(neg)[0])


def generate_formula(params: ModelParams, seed: SeedSpec) -> Formula:
    rng = derive_stream(seed)
    if params.m == 0:
        return Formula(params.n)
    u = rng.random_array(params.m * params.n).reshape(params.m, params.n)
    pos, neg = _classify(u, params.p, params.q)
    return Formula.from_masks(params.n, _pack_rows(pos), _pack_rows(neg))


def _fmt_float(v):
    return repr(float(v))


def encode_dimacs(
    formula: Formula, params: Optional[ModelParams] = None, seed: Optional[SeedSpec] = None
) -> str:
    """DIMACS CNF text; generation metadata goes into leading comments."""
    lines = ["c randsat instance", f"c n = {formula.n}", f"c m = {formula.m}"]
    if params is not None:
        lines += [f"c p = {_fmt_float(params.p)}", f"c q = {_fmt_float(params.q)}"]
    if seed is not None:
        lines += [f"c master_seed = {seed.master_seed}", f"c stream_index = {seed.stream_index}"]
    lines.append(f"p cnf {formula.n} {formula.m}")
    for lits in formula.to_literals():
        lines.append(" ".join(str(v) for v in lits + [0]))
    return "\n".join(lines) + "\n"


def decode_dimacs(text: str) -> Formula:
    """Parse DIMACS CNF. Clauses may span lines; ``0`` alone is the empty clause."""
    header = None
    clauses = []
    current = []
    open_line = None
    lineno = 0
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.strip()
        if not line or line.startswith("c"):
            continue
        if line.startswith("p"):
            if header is not None:
                raise DimacsError(lineno, "duplicate header")
            fields = line.split()
            if len(fields) != 4 or fields[1] != "cnf":
                raise DimacsError(lineno, f"bad header {line!r}, expected 'p cnf <n> <m>'")
            try:
                n, m = int(fields[2]), int(fields[3])
            except ValueError:
                raise DimacsError(lineno, f"non-integer counts in header {line!r}") from None
            if n < 0 or m < 0:
                raise DimacsError(lineno, "negative counts in header")
            header = (n, m)
            continue
        if header is None:
            raise DimacsError(lineno, "clause before 'p cnf' header")
        if line.startswith("%"):
            break
        for tok in line.split():
            try:
                lit = int(tok)
            except ValueError:
                raise DimacsError(lineno, f"non-integer token {tok!r}") from None
            if lit == 0:
                try:
                    clauses.append(Clause.from_literals(current))
                except ValueError as exc:
                    raise DimacsError(lineno, str(exc)) from None
                current = []
                open_line = None
                continue
            if abs(lit) > header[0]:
                raise DimacsError(lineno, f"literal {lit} out of range for n={header[0]}")
            current.append(lit)
            open_line = lineno if open_line is None else open_line
    if header is None:
        raise DimacsError(lineno, "missing 'p cnf' header")
    if current:
        raise DimacsError(open_line, "clause not terminated by 0")
    if len(clauses) != header[1]:
        raise DimacsError(lineno, f"header declares {header[1]} clauses, found {len(clauses)}")
    return Formula(header[0], clauses)


def encode_json(formula: Formula, params: ModelParams, seed: SeedSpec) -> str:
    doc = {
        "n": formula.n,
        "m": formula.m,
        "p": params.p,
        "q": params.q,
        "master_seed": seed.master_seed,
        "stream_index": seed.stream_index,
        "clauses": formula.to_literals(),
    }
    return json.dumps(doc)


def decode_json(text: str):
    """Inverse of ``encode_json``: returns ``(formula, params, seed)``."""
    doc = json.loads(text)
    formula = Formula.from_literals(doc["n"], doc["clauses"])
    if formula.m != doc["m"]:
        raise ValueError(f"'m' is {doc['m']} but {formula.m} clauses are listed")
    params = ModelParams(doc["n"], doc["m"], doc["p"], doc["q"])
    seed = SeedSpec(doc["master_seed"], doc["stream_index"])
    return formula, params, seed
