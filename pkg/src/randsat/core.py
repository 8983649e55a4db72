"""Bit-mask CNF formulas, assignment evaluation, exact counting and DPLL.

Variable ``a_s`` (1-based) lives at bit ``s - 1`` of every mask. A clause is
a pair ``(pos_mask, neg_mask)``; an assignment is an ``n``-bit word where a
set bit means the variable is true (tau = +1).
"""

from dataclasses import dataclass
from typing import Iterable, Optional, Sequence

import numpy as np

ENUMERATION_LIMIT = 30


class CapacityError(RuntimeError):
    """Raised when exhaustive enumeration is requested above the limit."""


def _width_mask(n):
    return (1 << n) - 1


@dataclass(frozen=True)
class Assignment:
    """Truth assignment as an ``n``-bit word."""

    bits: int
    n: int

    def __post_init__(self):
        if self.n < 0:
            raise ValueError("n must be nonnegative")
        if self.bits < 0 or self.bits >> self.n:
            raise ValueError(f"bits {self.bits:#x} do not fit in {self.n} bits")

    @classmethod
    def from_signs(cls, signs: Sequence[int]) -> "Assignment":
        """Build from a +1/-1 vector ``(tau_1, ..., tau_n)``."""
        bits = 0
        for s, t in enumerate(signs):
            if t == 1:
                bits |= 1 << s
            elif t != -1:
                raise ValueError("signs must be +1 or -1")
        return cls(bits, len(signs))

    @property
    def signs(self) -> tuple:
        return tuple(1 if self.bits >> s & 1 else -1 for s in range(self.n))

    @property
    def n_negative(self) -> int:
        """Number of coordinates equal to -1 (variables set false)."""
        return self.n - bin(self.bits).count("1")


@dataclass(frozen=True)
class Clause:
    """Disjunction stored as positive and negated variable masks.

    ``Clause(0, 0)`` is the empty clause, false under every assignment.
    """

    pos_mask: int
    neg_mask: int

    def __post_init__(self):
        if self.pos_mask < 0 or self.neg_mask < 0:
            raise ValueError("masks must be nonnegative")
        if self.pos_mask & self.neg_mask:
            raise ValueError("a variable may occur at most once per clause")

    @classmethod
    def from_literals(cls, literals: Iterable[int]) -> "Clause":
        """Build from signed 1-based DIMACS-style literals."""
        pos = neg = 0
        for lit in literals:
            if lit == 0:
                raise ValueError("literal 0 is not a variable")
            if lit > 0:
                pos |= 1 << (lit - 1)
            else:
                neg |= 1 << (-lit - 1)
        return cls(pos, neg)

    @property
    def literals(self) -> list:
        out = []
        mask, s = self.pos_mask | self.neg_mask, 0
        while mask >> s:
            if self.pos_mask >> s & 1:
                out.append(s + 1)
            elif self.neg_mask >> s & 1:
                out.append(-(s + 1))
            s += 1
        return out

    def __len__(self):
        return bin(self.pos_mask | self.neg_mask).count("1")

    def is_satisfied_by(self, bits: int) -> bool:
        return bool((self.pos_mask & bits) | (self.neg_mask & ~bits))


class Formula:
    """Immutable CNF formula over ``n`` variables.

    Clauses are ordered and may repeat. Masks are held as Python ints so any
    ``n`` is representable; ``masks()`` gives a cached ``uint64`` view for
    the compiled counting kernel when ``n <= 64``.
    """

    __slots__ = ("_n", "_pos", "_neg", "_arrays")

    def __init__(self, n: int, clauses: Iterable[Clause] = ()):
        pos, neg = [], []
        for cl in clauses:
            pos.append(cl.pos_mask)
            neg.append(cl.neg_mask)
        self._init(n, tuple(pos), tuple(neg))

    def _init(self, n, pos, neg):
        if n < 0:
            raise ValueError("n must be nonnegative")
        full = _width_mask(n)
        for a, b in zip(pos, neg):
            if (a | b) & ~full:
                raise ValueError(f"clause uses a variable above n={n}")
            if a & b:
                raise ValueError("a variable may occur at most once per clause")
        self._n = n
        self._pos = pos
        self._neg = neg
        self._arrays = None

    @classmethod
    def from_masks(cls, n: int, pos: Sequence[int], neg: Sequence[int]) -> "Formula":
        if len(pos) != len(neg):
            raise ValueError("pos and neg must have the same length")
        if isinstance(pos, np.ndarray):
            pos = pos.tolist()
        if isinstance(neg, np.ndarray):
            neg = neg.tolist()
        self = cls.__new__(cls)
        self._init(n, tuple(int(v) for v in pos), tuple(int(v) for v in neg))
        return self

    @classmethod
    def from_literals(cls, n: int, clauses: Iterable[Iterable[int]]) -> "Formula":
        return cls(n, [Clause.from_literals(c) for c in clauses])

    @property
    def n(self) -> int:
        return self._n

    @property
    def m(self) -> int:
        return len(self._pos)

    @property
    def pos_masks(self) -> tuple:
        return self._pos

    @property
    def neg_masks(self) -> tuple:
        return self._neg

    @property
    def clauses(self) -> tuple:
        return tuple(Clause(a, b) for a, b in zip(self._pos, self._neg))

    def masks(self):
        """``(pos, neg)`` as read-only ``uint64`` arrays (requires ``n <= 64``)."""
        if self._n > 64:
            raise CapacityError("uint64 masks need n <= 64")
        if self._arrays is None:
            pos = np.array(self._pos, dtype=np.uint64)
            neg = np.array(self._neg, dtype=np.uint64)
            pos.flags.writeable = False
            neg.flags.writeable = False
            self._arrays = (pos, neg)
        return self._arrays

    def __len__(self):
        return self.m

    def __iter__(self):
        return iter(self.clauses)

    def __eq__(self, other):
        if not isinstance(other, Formula):
            return NotImplemented
        return self._n == other._n and self._pos == other._pos and self._neg == other._neg

    def __hash__(self):
        return hash((self._n, self._pos, self._neg))

    def __repr__(self):
        return f"Formula(n={self._n}, m={self.m})"

    def to_literals(self) -> list:
        return [cl.literals for cl in self.clauses]


def evaluate(formula: Formula, assignment: Assignment) -> bool:
    """T(F): True iff ``assignment`` satisfies every clause."""
    if assignment.n != formula.n:
        raise ValueError(
            f"assignment has {assignment.n} variables, formula has {formula.n}"
        )
    bits = assignment.bits
    notbits = ~bits
    for a, b in zip(formula.pos_masks, formula.neg_masks):
        if not ((a & bits) | (b & notbits)):
            return False
    return True


def count_solutions(formula: Formula, limit: Optional[int] = None) -> int:
    """Exact number of satisfying assignments by exhaustive enumeration."""
    from ._kernels import count_falsified

    limit = ENUMERATION_LIMIT if limit is None else limit
    n = formula.n
    if n > limit:
        raise CapacityError(
            f"n={n} exceeds the enumeration limit {limit}; use is_satisfiable"
        )
    if formula.m == 0:
        return 1 << n
    pos, neg = formula.masks()
    bad = count_falsified(n, pos.astype(np.int64), neg.astype(np.int64))
    return (1 << n) - int(bad)


@dataclass(frozen=True)
class SatResult:
    """Verdict of the exact decision procedure; truthy iff satisfiable."""

    satisfiable: bool
    witness: Optional[Assignment] = None

    def __bool__(self):
        return self.satisfiable


def _assign(clauses, true_mask, false_mask):
    # Simplify under a partial assignment; None signals a falsified clause.
    out = []
    keep_pos = ~false_mask
    keep_neg = ~true_mask
    for a, b in clauses:
        if (a & true_mask) or (b & false_mask):
            continue
        a &= keep_pos
        b &= keep_neg
        if not (a | b):
            return None
        out.append((a, b))
    return out


def _propagate(clauses, true_mask, false_mask):
    """Unit propagation and pure-literal elimination to a fixpoint."""
    while True:
        unit_t = unit_f = 0
        for a, b in clauses:
            lits = a | b
            if lits & (lits - 1) == 0:
                if a:
                    unit_t |= a
                else:
                    unit_f |= b
        if unit_t & unit_f:
            return None, true_mask, false_mask
        if not (unit_t | unit_f):
            any_pos = any_neg = 0
            for a, b in clauses:
                any_pos |= a
                any_neg |= b
            unit_t = any_pos & ~any_neg
            unit_f = any_neg & ~any_pos
            if not (unit_t | unit_f):
                return clauses, true_mask, false_mask
        true_mask |= unit_t
        false_mask |= unit_f
        clauses = _assign(clauses, unit_t, unit_f)
        if clauses is None:
            return None, true_mask, false_mask


def _branch_variable(clauses):
    # Most frequent variable among the shortest clauses, first literal's sign first.
    shortest = min(bin(a | b).count("1") for a, b in clauses)
    counts = {}
    for a, b in clauses:
        lits = a | b
        if bin(lits).count("1") != shortest:
            continue
        while lits:
            low = lits & -lits
            c = counts.setdefault(low, [0, 0])
            c[0 if a & low else 1] += 1
            lits ^= low
    bit, (npos, nneg) = max(counts.items(), key=lambda kv: (kv[1][0] + kv[1][1], -kv[0]))
    return bit, npos >= nneg


def is_satisfiable(formula: Formula) -> SatResult:
    """Complete DPLL search with unit propagation and pure literals.

    Works for any ``n``. On SAT the returned witness satisfies the formula;
    variables left unconstrained by the search are set false.
    """
    n = formula.n
    clauses = list(zip(formula.pos_masks, formula.neg_masks))
    if any(not (a | b) for a, b in clauses):
        return SatResult(False)
    clauses = list(dict.fromkeys(clauses))
    stack = [(clauses, 0, 0)]
    while stack:
        clauses, t, f = stack.pop()
        clauses, t, f = _propagate(clauses, t, f)
        if clauses is None:
            continue
        if not clauses:
            return SatResult(True, Assignment(t, n))
        bit, positive_first = _branch_variable(clauses)
        branches = [(bit, 0), (0, bit)] if positive_first else [(0, bit), (bit, 0)]
        for bt, bf in reversed(branches):
            sub = _assign(clauses, bt, bf)
            if sub is not None:
                stack.append((sub, t | bt, f | bf))
    return SatResult(False)
