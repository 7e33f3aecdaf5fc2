"""Similarity-ordered enumeration of Hamming distance tuples and their buckets.

The generator walks all (z+1)(p-z+1) valid tuples for a query with popcount z
in non-increasing cosine-similarity order.  Up to the threshold radius
``r_hat(z)`` similarity decreases monotonically with Hamming distance, so the
walk sweeps whole distance layers (ball phase).  Past the threshold the order
interleaves distances; a priority queue seeded with the best tuple of the next
layer pops the maximum and pushes two successor candidates per pop (anchor
phase): the best tuple one layer further out, and the next-best tuple of the
same layer.
"""

from __future__ import annotations

import heapq
import math
from itertools import combinations
from typing import Iterator, Optional

from .core import BinaryCode, HammingTuple, sim_key, validate_tuple


def r_hat(z: int) -> int:
    """Largest integer r with r*(r+1) <= z, computed in integer arithmetic."""
    if z < 0:
        raise ValueError("popcount must be nonnegative")
    return (math.isqrt(4 * z + 1) - 1) // 2


def first_anchor(t: HammingTuple, z: int, p: int) -> Optional[HammingTuple]:
    """Best tuple at the next Hamming distance, or None past the last layer.

    At distance d = r1+r2+1 the maximum-similarity valid tuple is
    (c, d - c) with c = max(0, d - (p - z)).
    """
    d = t[0] + t[1] + 1
    if d > p:
        return None
    c = max(0, d - (p - z))
    if c > z:
        return None
    return HammingTuple(c, d - c)


def second_anchor(t: HammingTuple, z: int, p: int) -> Optional[HammingTuple]:
    """Next-best tuple at the same Hamming distance: (r1+1, r2-1) when valid."""
    x, y = t
    if x + 1 > z or y < 1:
        return None
    return HammingTuple(x + 1, y - 1)


class TupleSequence:
    """Stateful generator of valid tuples in non-increasing similarity order.

    Single-owner mutable state: not safe for concurrent mutation.  Iterating
    exhausts after exactly (z+1)*(p-z+1) tuples, with no repeats.
    """

    def __init__(self, z: int, p: int):
        if not 0 <= z <= p:
            raise ValueError(f"need 0 <= z <= p, got z={z}, p={p}")
        self.z = z
        self.p = p
        self.r_hat = r_hat(z)
        self.emitted_count = 0
        self.entered_anchor_phase = False
        self._total = (z + 1) * (p - z + 1)
        self._in_ball = True
        self._r = 0
        self._r1 = 0  # cursor inside the current ball layer
        self._queue: list[tuple] = []
        # Tuples ever pushed to the queue, as a dense bitmap over
        # r1 * (p - z + 1) + r2.  Ball-phase tuples never re-enter the queue
        # (anchors always sit at distance > r_hat), so they are not marked.
        self._traversed = bytearray((self._total + 7) // 8)

    def _mark(self, t: HammingTuple) -> None:
        i = t[0] * (self.p - self.z + 1) + t[1]
        self._traversed[i >> 3] |= 1 << (i & 7)

    def _seen(self, t: HammingTuple) -> bool:
        i = t[0] * (self.p - self.z + 1) + t[1]
        return bool(self._traversed[i >> 3] & (1 << (i & 7)))

    def _push(self, t: Optional[HammingTuple]) -> None:
        if t is None or self._seen(t):
            return
        self._mark(t)
        heapq.heappush(self._queue, (sim_key(self.z, t), t))

    def next_tuple(self) -> Optional[HammingTuple]:
        """The next tuple in the order, or None when all have been emitted."""
        if self.emitted_count >= self._total:
            return None
        z, p = self.z, self.p
        if self._in_ball:
            t = HammingTuple(self._r1, self._r - self._r1)
            self._r1 += 1
            if self._r1 > min(self._r, z):
                self._r += 1
                if self._r > self.r_hat:
                    # Seed the queue with the best tuple of the first layer
                    # past the ball; t sits at distance r_hat so its first
                    # anchor is exactly that tuple.
                    self._in_ball = False
                    self._push(first_anchor(t, z, p))
                else:
                    self._r1 = max(0, self._r - (p - z))
            self.emitted_count += 1
            return t
        self.entered_anchor_phase = True
        _, t = heapq.heappop(self._queue)
        self._push(first_anchor(t, z, p))
        self._push(second_anchor(t, z, p))
        self.emitted_count += 1
        return t

    def __iter__(self) -> Iterator[HammingTuple]:
        return self

    def __next__(self) -> HammingTuple:
        t = self.next_tuple()
        if t is None:
            raise StopIteration
        return t


def combination_masks(positions: list[int], k: int) -> list[int]:
    """OR-folded bit masks of all k-subsets of positions, lexicographic order."""
    masks = []
    for combo in combinations(positions, k):
        m = 0
        for pos in combo:
            m |= 1 << pos
        masks.append(m)
    return masks


def iter_bucket_values(value: int, ones: list[int], zeros: list[int], t: HammingTuple) -> Iterator[int]:
    """Raw integer variant of enumerate_bucket_indices for the index engines.

    ``ones``/``zeros`` are the set/clear bit positions of ``value`` in
    ascending order.  Yields value with t.r1 of the ones cleared and t.r2 of
    the zeros set, clear-choices outer, set-choices inner, each lexicographic
    by position.
    """
    set_masks = combination_masks(zeros, t[1])
    for clear in combinations(ones, t[0]):
        base = value
        for pos in clear:
            base ^= 1 << pos
        for m in set_masks:
            yield base | m


def enumerate_bucket_indices(q: BinaryCode, t: HammingTuple) -> Iterator[BinaryCode]:
    """All codes at tuple t from q, lazily, in a fixed deterministic order.

    Yields exactly bucket_count(z, p, t) codes: every way of clearing t.r1 of
    q's set bits and setting t.r2 of its clear bits, lowest positions first.
    """
    z = q.value.bit_count()
    validate_tuple(z, q.p, t)
    ones = [i for i in range(q.p) if (q.value >> i) & 1]
    zeros = [i for i in range(q.p) if not (q.value >> i) & 1]
    for v in iter_bucket_values(q.value, ones, zeros, t):
        yield BinaryCode(q.p, v)
