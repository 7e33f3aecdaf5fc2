"""Packed binary codes, Hamming distance tuples, and exact cosine comparison.

For a query q and a code b of the same length p, the Hamming distance splits
into a tuple (r1, r2): r1 counts positions that are 1 in q and 0 in b, r2
counts positions that are 0 in q and 1 in b.  With z = popcount(q), the
cosine similarity of q and b depends only on (z, r1, r2):

    sim = (z - r1) / (sqrt(z) * sqrt(z - r1 + r2))

Every comparison of similarities in this package goes through exact integer
arithmetic on (z, r1, r2); floats only appear in reported values.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from fractions import Fraction
from typing import Iterable, NamedTuple

# Cross-multiplied comparisons and binomial counts stay exact at any p thanks
# to Python integers; the cap only keeps file headers and dense structures sane.
MAX_CODE_LENGTH = 4096

_WORD_BITS = 64
_WORD_MASK = (1 << 64) - 1


class HammingTuple(NamedTuple):
    """Pair (r1, r2): bits lost from the query vs bits gained by the code."""

    r1: int
    r2: int

    @property
    def distance(self) -> int:
        return self.r1 + self.r2


@dataclass(frozen=True, slots=True)
class BinaryCode:
    """Immutable bit vector of length p, packed into a single integer.

    Bit i of the code is bit i of ``value``; equivalently, bit (i mod 64) of
    the little-endian 64-bit word (i div 64).  That packing is the on-disk
    record format as well.
    """

    p: int
    value: int

    def __post_init__(self):
        if not 1 <= self.p <= MAX_CODE_LENGTH:
            raise ValueError(f"code length must be in [1, {MAX_CODE_LENGTH}], got {self.p}")
        if self.value < 0 or self.value >> self.p:
            raise ValueError("code value has bits set beyond position p")

    @classmethod
    def from_bits(cls, bits: Iterable[int]) -> "BinaryCode":
        """Build a code from an iterable of 0/1 values, lowest position first."""
        value = 0
        n = 0
        for i, bit in enumerate(bits):
            if bit not in (0, 1):
                raise ValueError("bits must be 0 or 1")
            value |= bit << i
            n = i + 1
        return cls(n, value)

    @classmethod
    def from_words(cls, words: Iterable[int], p: int) -> "BinaryCode":
        value = 0
        count = 0
        for j, w in enumerate(words):
            if not 0 <= w <= _WORD_MASK:
                raise ValueError("words must be unsigned 64-bit integers")
            value |= w << (j * _WORD_BITS)
            count = j + 1
        if count != (p + 63) // 64:
            raise ValueError(f"expected {(p + 63) // 64} words for p={p}, got {count}")
        code = cls(p, value)
        return code

    @property
    def words(self) -> tuple[int, ...]:
        n = (self.p + 63) // 64
        return tuple((self.value >> (j * _WORD_BITS)) & _WORD_MASK for j in range(n))

    def to_bits(self) -> list[int]:
        return [(self.value >> i) & 1 for i in range(self.p)]

    def popcount(self) -> int:
        return self.value.bit_count()


def popcount(code: BinaryCode) -> int:
    """Number of set bits in the code."""
    return code.value.bit_count()


def hamming_tuple(q: BinaryCode, b: BinaryCode) -> HammingTuple:
    """Distance tuple of b relative to q; components sum to the Hamming distance."""
    if q.p != b.p:
        raise ValueError(f"code length mismatch: {q.p} vs {b.p}")
    r1 = (q.value & ~b.value).bit_count()
    r2 = (b.value & ~q.value).bit_count()
    return HammingTuple(r1, r2)


def tuple_similarity(z: int, r1: int, r2: int) -> float:
    """Cosine similarity for a tuple (r1, r2) at query popcount z.

    Zero numerator (r1 == z) is defined as similarity 0; this covers the
    all-zero code, whose denominator would otherwise vanish too.
    """
    if z <= 0:
        raise ValueError("similarity is undefined for a zero-norm query")
    num = z - r1
    if num == 0:
        return 0.0
    return num / math.sqrt(z * (z - r1 + r2))


def cosine_similarity(q: BinaryCode, b: BinaryCode) -> float:
    """Cosine of the angle between two codes, in [0, 1]."""
    t = hamming_tuple(q, b)
    return tuple_similarity(q.value.bit_count(), t.r1, t.r2)


def validate_tuple(z: int, p: int, t: HammingTuple) -> None:
    r1, r2 = t
    if not (0 <= r1 <= z and 0 <= r2 <= p - z):
        raise ValueError(f"tuple {tuple(t)} invalid for z={z}, p={p}")


LESS, EQUAL, GREATER = -1, 0, 1


def compare_sim(z: int, a: HammingTuple, b: HammingTuple) -> int:
    """Exact ordering of similarities: -1/0/+1 as sim(z,a) is below/equal/above sim(z,b).

    Both similarities are nonnegative, so they compare via squared values:
    (z-r1)^2 / (z - r1 + r2), cross-multiplied in integer arithmetic.  Tuples
    with zero numerator all share similarity 0 and must be handled apart,
    since their denominator may vanish as well.
    """
    na = z - a[0]
    nb = z - b[0]
    if na == 0 and nb == 0:
        return EQUAL
    if na == 0:
        return LESS
    if nb == 0:
        return GREATER
    lhs = na * na * (z - b[0] + b[1])
    rhs = nb * nb * (z - a[0] + a[1])
    if lhs > rhs:
        return GREATER
    if lhs < rhs:
        return LESS
    return EQUAL


class SimKey(NamedTuple):
    """Total-order sort key: ascending SimKey = descending similarity.

    Ties in similarity break by smaller distance, then smaller r1.  The key
    never touches floating point: the leading component is the negated exact
    squared similarity (the constant 1/z factor is dropped).
    """

    neg_sim_sq: Fraction
    distance: int
    r1: int


_ZERO = Fraction(0)


def sim_key(z: int, t: HammingTuple) -> SimKey:
    r1, r2 = t
    num = z - r1
    if num == 0:
        return SimKey(_ZERO, r1 + r2, r1)
    return SimKey(Fraction(-num * num, z - r1 + r2), r1 + r2, r1)


def bucket_count(z: int, p: int, t: HammingTuple) -> int:
    """Number of codes lying at tuple t from a query with popcount z."""
    validate_tuple(z, p, t)
    return math.comb(z, t[0]) * math.comb(p - z, t[1])
