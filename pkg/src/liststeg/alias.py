"""Integer-exact alias decomposition for O(1)-per-draw batch sampling.

A distribution on the 2^32 grid is split into |V| two-token slots.  Slot i
holds a primary token and an alias token plus a 64-bit fixed-point
threshold: the probability that slot i yields its primary.  Construction is
pure integer arithmetic, so the decomposition reproduces the input weights
exactly:

    sum over slots of   [primary_i = s] * threshold_i
                      + [alias_i  = s] * (2^64 - threshold_i)
    ==  |V| * 2^32 * weights[s]        for every token s.

Thresholds live in [0, 2^64].  The value 2^64 itself does not fit in a
uint64, so it is stored as 0xFFFF...FF with alias == primary; sampling
output is unaffected (both branches return the same token) and
``exact_threshold`` reconstructs the true value.  Paired slots never store
a threshold above (2^32 - 1) << 32, so the sentinel is unambiguous.

Drawing one sample uses exactly two u64 randoms: the first selects the
slot via the multiply-high map floor(|V| * r / 2^64) (per-token bias at
most |V| / 2^64, negligible at the scheme's security level), the second is
compared against the slot threshold.
"""

from __future__ import annotations

import heapq

import numpy as np

from .dist import GRID, QuantizedDistribution

_SENTINEL = np.uint64(0xFFFFFFFFFFFFFFFF)
_FULL = 1 << 64
_C32 = np.uint64(32)
_M32 = np.uint64(0xFFFFFFFF)


class AliasTable:
    """Immutable slot table; build with :func:`build`."""

    __slots__ = ("vocab_size", "primary", "alias", "thresholds", "_shift")

    def __init__(self, primary: np.ndarray, alias: np.ndarray, thresholds: np.ndarray):
        self.vocab_size = int(primary.shape[0])
        self.primary = primary
        self.alias = alias
        self.thresholds = thresholds
        v = self.vocab_size
        # power-of-two vocab: slot = r >> (64 - log2 |V|), same value, one op
        self._shift = np.uint64(64 - v.bit_length() + 1) if v & (v - 1) == 0 else None
        for a in (primary, alias, thresholds):
            a.flags.writeable = False

    def exact_threshold(self, slot: int) -> int:
        t = int(self.thresholds[slot])
        if t == int(_SENTINEL) and self.primary[slot] == self.alias[slot]:
            return _FULL
        return t

    def exact_token_mass(self, token: int) -> int:
        """Left-hand side of the exact-mass identity for one token."""
        total = 0
        for i in range(self.vocab_size):
            t = self.exact_threshold(i)
            if int(self.primary[i]) == token:
                total += t
            if int(self.alias[i]) == token:
                total += _FULL - t
        return total

    def slot_indices(self, first_randoms: np.ndarray) -> np.ndarray:
        """Map u64 randoms to slot ids: floor(|V| * r / 2^64), exactly."""
        r = np.asarray(first_randoms, dtype=np.uint64)
        if self._shift is not None:
            return r >> self._shift
        v = np.uint64(self.vocab_size)
        lo = (r & _M32) * v
        hi = (r >> _C32) * v
        return (hi + (lo >> _C32)) >> _C32

    def sample_batch(self, randoms) -> np.ndarray:
        """Draw len(randoms)/2 tokens; draw i uses randoms[2i] and randoms[2i+1].

        Output order matches input order; same randoms give the same tokens
        under any batch split.
        """
        r = np.asarray(randoms, dtype=np.uint64)
        if r.ndim != 1 or r.shape[0] % 2:
            raise ValueError("randoms must be a flat sequence of even length")
        pairs = r.reshape(-1, 2)
        x = self.slot_indices(pairs[:, 0])
        take_primary = pairs[:, 1] < self.thresholds[x]
        return np.where(take_primary, self.primary[x], self.alias[x]).astype(np.uint32)


def build(d: QuantizedDistribution) -> AliasTable:
    """Deterministic alias decomposition of an integer-grid distribution.

    Scaled weights u_i = |V| * weights[i] are exact numerators over 2^32.
    Tokens with u < 2^32 form the low list, the rest the high list, both
    ordered by ascending token id.  While both lists are non-empty, the
    smallest-id low token is paired with the smallest-id high token; the
    high token's remainder re-enters whichever list fits.  Leftovers (which
    exact arithmetic forces to carry u == 2^32) become full-threshold slots.
    """
    v = d.vocab_size
    u = [v * int(w) for w in d.weights]
    low: list[int] = []
    high: list[int] = []
    for i in range(v):
        if u[i] < GRID:
            low.append(i)
        else:
            high.append(i)
    heapq.heapify(low)
    heapq.heapify(high)

    primary = np.empty(v, dtype=np.uint32)
    alias = np.empty(v, dtype=np.uint32)
    thresholds = np.empty(v, dtype=np.uint64)
    slot = 0
    while low and high:
        j = heapq.heappop(low)
        k = heapq.heappop(high)
        primary[slot] = j
        alias[slot] = k
        thresholds[slot] = np.uint64(u[j] << 32)
        u[k] -= GRID - u[j]
        heapq.heappush(low if u[k] < GRID else high, k)
        slot += 1
    for leftovers in (low, high):
        while leftovers:
            k = heapq.heappop(leftovers)
            # exact grid arithmetic leaves only u == 2^32 here
            primary[slot] = k
            alias[slot] = k
            thresholds[slot] = _SENTINEL
            slot += 1
    assert slot == v
    return AliasTable(primary, alias, thresholds)
