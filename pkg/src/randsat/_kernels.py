"""Compiled inner loops for exhaustive assignment enumeration."""

import numpy as np
from numba import njit


@njit(cache=True)
def _popcount64(v):
    v = v - ((v >> np.uint64(1)) & np.uint64(0x5555555555555555))
    v = (v & np.uint64(0x3333333333333333)) + ((v >> np.uint64(2)) & np.uint64(0x3333333333333333))
    v = (v + (v >> np.uint64(4))) & np.uint64(0x0F0F0F0F0F0F0F0F)
    return (v * np.uint64(0x0101010101010101)) >> np.uint64(56)


@njit(cache=True)
def count_falsified(n, pos, neg):
    """Number of assignments falsifying at least one clause.

    Each clause rules out exactly one subcube: the assignments that set every
    positive variable of the clause false and every negated one true. The
    subcubes are marked in a bit-packed table by enumerating the free
    variables of each clause, so the cost is the total subcube volume rather
    than ``m * 2**n``.
    """
    size = np.int64(1) << n
    full = size - 1
    nwords = (size + 63) >> 6
    marked = np.zeros(nwords, dtype=np.uint64)
    one = np.uint64(1)
    for j in range(pos.shape[0]):
        lits = pos[j] | neg[j]
        if lits == 0:
            return size
        free = full & ~lits
        base = neg[j]
        s = np.int64(0)
        while True:
            idx = base | s
            marked[idx >> 6] |= one << np.uint64(idx & 63)
            s = (s - free) & free
            if s == 0:
                break
    total = np.uint64(0)
    for w in range(nwords):
        total += _popcount64(marked[w])
    return np.int64(total)

