"""Single hash table over full codes: exact angular KNN for short code lengths.

Each code is the direct address of its bucket.  A KNN query walks Hamming
distance tuples in similarity order and enumerates every bucket of each tuple
class, so the probing cost is the sum of binomial bucket counts up to the
stopping tuple; this explodes for sparse tables (long codes), which is the
regime the multi-index engine exists for.
"""

from __future__ import annotations

import time
import warnings
from dataclasses import dataclass, field
from typing import Optional

from .core import BinaryCode, HammingTuple, bucket_count, tuple_similarity, validate_tuple
from .dataset import as_dataset
from .probing import TupleSequence, combination_masks

DENSE_TABLE_MAX_BITS = 20


@dataclass
class QueryStats:
    """Per-query counters shared by both index engines."""

    buckets_probed: int = 0
    candidates_checked: int = 0
    tuples_emitted: int = 0
    entered_anchor_phase: bool = False
    time_ns: int = 0
    boundary_tuple: Optional[HammingTuple] = None


@dataclass
class HashIndex:
    """Immutable after build; concurrent read-only queries are safe."""

    p: Optional[int]
    values: list[int] = field(repr=False)
    pops: list[int] = field(repr=False)
    dense_bits: int = DENSE_TABLE_MAX_BITS
    _dense: Optional[list] = field(default=None, repr=False)
    _sparse: Optional[dict] = field(default=None, repr=False)

    @property
    def n(self) -> int:
        return len(self.values)

    def bucket(self, v: int) -> Optional[list[int]]:
        if self._dense is not None:
            return self._dense[v]
        return self._sparse.get(v)


def build_single(dataset, dense_bits: int = DENSE_TABLE_MAX_BITS) -> HashIndex:
    """Populate one hash table with every code as its own bucket address.

    Codes up to ``dense_bits`` bits use a directly addressed table of 2^p
    slots; longer codes fall back to a hash map.  Lengths beyond 32 bits are
    allowed but the probing cost of queries makes them impractical.
    """
    values, pops, p = as_dataset(dataset)
    index = HashIndex(p=p, values=values, pops=pops, dense_bits=dense_bits)
    if p is not None and p > 32:
        warnings.warn(
            f"single-table index over p={p} bit codes; KNN probing cost will be "
            "astronomical on sparse data (use the multi-index engine)",
            stacklevel=2,
        )
    if p is not None and p <= dense_bits:
        dense: list = [None] * (1 << p)
        for i, v in enumerate(values):
            ids = dense[v]
            if ids is None:
                dense[v] = [i]
            else:
                ids.append(i)
        index._dense = dense
    else:
        sparse: dict[int, list[int]] = {}
        for i, v in enumerate(values):
            sparse.setdefault(v, []).append(i)
        index._sparse = sparse
    return index


class _MaskCache:
    """Combination masks for one query's set/clear bit positions."""

    def __init__(self, value: int, p: int):
        self.ones = [i for i in range(p) if (value >> i) & 1]
        self.zeros = [i for i in range(p) if not (value >> i) & 1]
        self._by_k: dict[tuple[str, int], list[int]] = {}

    def clear_masks(self, k: int) -> list[int]:
        key = ("1", k)
        if key not in self._by_k:
            self._by_k[key] = combination_masks(self.ones, k)
        return self._by_k[key]

    def set_masks(self, k: int) -> list[int]:
        key = ("0", k)
        if key not in self._by_k:
            self._by_k[key] = combination_masks(self.zeros, k)
        return self._by_k[key]


def knn_single(index: HashIndex, q: BinaryCode, k: int) -> tuple[list[tuple[int, float]], QueryStats]:
    """Exact top-min(k, n) by cosine similarity via bucket probing.

    Whole tuple classes are probed at a time; the walk stops at the first
    class boundary where at least k items (or the entire dataset) have been
    retrieved.  Ranking and tie-breaking match the linear scan exactly.
    """
    start = time.perf_counter_ns()
    if k < 1:
        raise ValueError("k must be at least 1")
    z = q.value.bit_count()
    if z == 0:
        raise ValueError("zero-norm query: cosine similarity is undefined")
    stats = QueryStats()
    n = index.n
    if n == 0:
        stats.time_ns = time.perf_counter_ns() - start
        return [], stats
    if index.p != q.p:
        raise ValueError(f"code length mismatch: index p={index.p}, query p={q.p}")

    masks = _MaskCache(q.value, q.p)
    seq = TupleSequence(z, q.p)
    bucket = index.bucket
    qv = q.value
    groups: list[tuple[HammingTuple, list[int]]] = []
    collected = 0
    for t in seq:
        stats.tuples_emitted += 1
        stats.buckets_probed += bucket_count(z, q.p, t)
        found: list[int] = []
        for m1 in masks.clear_masks(t.r1):
            base = qv ^ m1
            for m2 in masks.set_masks(t.r2):
                ids = bucket(base | m2)
                if ids is not None:
                    found.extend(ids)
        if found:
            found.sort()
            groups.append((t, found))
            collected += len(found)
            stats.candidates_checked += len(found)
        if collected >= k or collected == n:
            break
    stats.entered_anchor_phase = seq.entered_anchor_phase

    out: list[tuple[int, float]] = []
    limit = min(k, n)
    for t, ids in groups:
        sim = tuple_similarity(z, t.r1, t.r2)
        for i in ids:
            if len(out) == limit:
                break
            out.append((i, sim))
            stats.boundary_tuple = t
    stats.time_ns = time.perf_counter_ns() - start
    return out, stats


def rnn_tuple_single(index: HashIndex, q: BinaryCode, bound: HammingTuple) -> set[int]:
    """Ids of all codes whose distance tuple is component-wise <= bound."""
    z = q.value.bit_count()
    if index.p is not None and index.p != q.p:
        raise ValueError(f"code length mismatch: index p={index.p}, query p={q.p}")
    validate_tuple(z, q.p, bound)
    if index.n == 0:
        return set()
    masks = _MaskCache(q.value, q.p)
    bucket = index.bucket
    qv = q.value
    result: set[int] = set()
    for r1 in range(bound.r1 + 1):
        for r2 in range(bound.r2 + 1):
            for m1 in masks.clear_masks(r1):
                base = qv ^ m1
                for m2 in masks.set_masks(r2):
                    ids = bucket(base | m2)
                    if ids is not None:
                        result.update(ids)
    return result
