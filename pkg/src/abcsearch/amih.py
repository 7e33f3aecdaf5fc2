"""Angular multi-index hashing: substring tables, pigeonhole candidate
generation, exact near-neighbor retrieval with verification, and the KNN
driver that keeps long-code search sublinear.

Codes are split into m disjoint contiguous substrings (widths differ by at
most one); table s is keyed by substring s.  Any code within a distance-tuple
bound (r1, r2) of the query must, in at least one substring, lie within a
tuple (r1', r2') with r1'+r2' <= floor((r1+r2)/m), r1' <= r1, r2' <= r2, so
probing those substring tuples in every table pools a candidate superset,
which is then verified against the full codes.
"""

from __future__ import annotations

import math
import time
from dataclasses import dataclass
from typing import Iterator, Optional, Sequence

import numpy as np

from .core import BinaryCode, HammingTuple, tuple_similarity, validate_tuple
from .dataset import Dataset
from .probing import TupleSequence, combination_masks
from .single_index import QueryStats

MAX_SUBSTRING_BITS = 64


def default_m(p: int, n: int) -> int:
    """Number of substring tables matched to the dataset size: round(p / log2 n).

    Uses Python's round (half to even), clamped to [1, p].
    """
    if n < 2:
        raise ValueError("default table count needs n >= 2")
    m = round(p / math.log2(n))
    return max(1, min(m, p))


def substring_spans(p: int, m: int) -> list[tuple[int, int]]:
    """m contiguous (offset, width) spans covering [0, p), widths differing by <= 1.

    The first p mod m spans are one bit wider.
    """
    if not 1 <= m <= p:
        raise ValueError(f"need 1 <= m <= p, got m={m}, p={p}")
    base, extra = divmod(p, m)
    spans = []
    offset = 0
    for s in range(m):
        width = base + (1 if s < extra else 0)
        spans.append((offset, width))
        offset += width
    return spans


def partition(code: BinaryCode, spans: Sequence[tuple[int, int]]) -> list[int]:
    """Substring values of a code, each right-aligned in its integer."""
    if sum(w for _, w in spans) != code.p:
        raise ValueError("spans do not cover the code")
    return [(code.value >> off) & ((1 << w) - 1) for off, w in spans]


@dataclass(frozen=True)
class CandidateTupleSet:
    """Substring tuples to probe for one (r1, r2)-near-neighbor instance."""

    bound: HammingTuple
    radius: int
    tuples: tuple[HammingTuple, ...]

    def __iter__(self) -> Iterator[HammingTuple]:
        return iter(self.tuples)

    def __len__(self) -> int:
        return len(self.tuples)

    def __contains__(self, t) -> bool:
        a, b = t
        return a + b <= self.radius and a <= self.bound.r1 and b <= self.bound.r2


def candidate_tuples(bound: HammingTuple, m: int) -> CandidateTupleSet:
    """All (a, b) with a+b <= floor((r1+r2)/m), a <= r1, b <= r2."""
    if m < 1:
        raise ValueError("m must be at least 1")
    r1, r2 = bound
    radius = (r1 + r2) // m
    tuples = []
    for d in range(radius + 1):
        for a in range(max(0, d - r2), min(d, r1) + 1):
            tuples.append(HammingTuple(a, d - a))
    return CandidateTupleSet(HammingTuple(r1, r2), radius, tuple(tuples))


def probing_bound(p: int, m: int, bound: HammingTuple) -> float:
    """Closed-form ceiling on buckets probed per near-neighbor instance.

    m * 2^(w * H(alpha)) with w = ceil(p/m) and alpha = (r1+r2)/p; H is the
    binary entropy.  Only valid for alpha <= 1/2.
    """
    r = bound.r1 + bound.r2
    if 2 * r > p:
        raise ValueError(f"bound inapplicable: (r1+r2)/p = {r}/{p} exceeds 1/2")
    w = -(-p // m)
    alpha = r / p
    if alpha == 0.0:
        return float(m)
    h = -(alpha * math.log2(alpha) + (1 - alpha) * math.log2(1 - alpha))
    return m * 2.0 ** (w * h)


class MultiIndex:
    """m substring hash tables plus the full code store.

    Immutable after build; queries own private scratch state, so concurrent
    read-only queries are safe.
    """

    def __init__(self, dataset: Dataset, m: int):
        self.p = dataset.p
        self.m = m
        self.spans = substring_spans(self.p, m)
        if max(w for _, w in self.spans) > MAX_SUBSTRING_BITS:
            raise ValueError(f"substring width exceeds {MAX_SUBSTRING_BITS} bits; increase m")
        self.dataset = dataset
        self.words = dataset.words
        self.pops_np = dataset.popcount_array()
        self.n = len(dataset)
        # Per table: item ids sorted by substring value (CSR layout) plus a
        # map from substring value to its bucket row.
        self.table_keys: list[np.ndarray] = []
        self.table_starts: list[np.ndarray] = []
        self.table_counts: list[np.ndarray] = []
        self.table_ids: list[np.ndarray] = []
        self.table_maps: list[dict[int, int]] = []

    def _install_table(self, keys, starts, counts, ids) -> None:
        self.table_keys.append(np.asarray(keys, dtype=np.uint64))
        self.table_starts.append(np.asarray(starts, dtype=np.int64))
        self.table_counts.append(np.asarray(counts, dtype=np.int64))
        self.table_ids.append(np.asarray(ids, dtype=np.int64))
        self.table_maps.append({int(k): row for row, k in enumerate(keys.tolist())})

    @property
    def values(self) -> list[int]:
        return self.dataset.values

    @property
    def pops(self) -> list[int]:
        return self.dataset.pops


def _substring_columns(words: np.ndarray, spans) -> list[np.ndarray]:
    """Per-span substring values of every item, as uint64 arrays."""
    cols = []
    for off, width in spans:
        lo_word, lo_bit = divmod(off, 64)
        vals = words[:, lo_word] >> np.uint64(lo_bit)
        if lo_bit and lo_bit + width > 64:
            vals = vals | (words[:, lo_word + 1] << np.uint64(64 - lo_bit))
        if width < 64:
            vals = vals & np.uint64((1 << width) - 1)
        cols.append(vals)
    return cols


def build_amih(dataset, m: Optional[int] = None) -> MultiIndex:
    """Build the m substring tables over the dataset.

    When m is omitted it defaults to round(p / log2 n) (and to 1 for n < 2),
    raised as needed to keep substrings within 64 bits.
    """
    if not isinstance(dataset, Dataset):
        codes = list(dataset)
        if not codes:
            raise ValueError("cannot build a multi-index over an empty plain sequence; wrap in a Dataset")
        dataset = Dataset.from_codes(codes)
    n = len(dataset)
    if m is None:
        m = default_m(dataset.p, n) if n >= 2 else 1
        m = max(m, -(-dataset.p // MAX_SUBSTRING_BITS))
    index = MultiIndex(dataset, m)
    for col in _substring_columns(dataset.words, index.spans):
        order = np.argsort(col, kind="stable")
        keys, starts, counts = np.unique(col[order], return_index=True, return_counts=True)
        index._install_table(keys, starts, counts, order)
    return index


class SearchScratch:
    """Per-(index, query) probing state, reusable across growing bounds.

    Tracks which (table, substring tuple) pairs were already probed, pools
    every discovered candidate exactly once, and groups candidates by their
    full distance tuple (verified in batches against the packed code store).
    """

    # Below this class size the numpy call overhead beats its per-bucket
    # advantage and a plain dict-probe loop wins.
    _VECTOR_MIN = 512

    def __init__(self, index: MultiIndex, q: BinaryCode):
        if q.p != index.p:
            raise ValueError(f"code length mismatch: index p={index.p}, query p={q.p}")
        self.index = index
        self.q = q
        self.z = q.value.bit_count()
        self.q_words = np.array(q.words, dtype=np.uint64)
        self.sub_values = partition(q, index.spans)
        self.sub_ones = []
        self.sub_zeros = []
        for (off, width), v in zip(index.spans, self.sub_values):
            self.sub_ones.append([i for i in range(width) if (v >> i) & 1])
            self.sub_zeros.append([i for i in range(width) if not (v >> i) & 1])
        self._masks: dict[tuple[int, int, int], list[int]] = {}
        self._masks_np: dict[tuple[int, int, int], np.ndarray] = {}
        self.probed: list[set[HammingTuple]] = [set() for _ in range(index.m)]
        self._pending: list[list[int]] = [[] for _ in range(index.m)]
        self._pending_np: list[list[np.ndarray]] = [[] for _ in range(index.m)]
        self._seen = np.zeros(index.n, dtype=bool)
        self.groups: dict[HammingTuple, list[int]] = {}
        self.buckets_probed = 0
        self.candidates_checked = 0

    def _combo_masks(self, s: int, kind: int, k: int) -> list[int]:
        key = (s, kind, k)
        masks = self._masks.get(key)
        if masks is None:
            positions = self.sub_ones[s] if kind else self.sub_zeros[s]
            masks = self._masks[key] = combination_masks(positions, k)
        return masks

    def _combo_masks_np(self, s: int, kind: int, k: int) -> np.ndarray:
        key = (s, kind, k)
        arr = self._masks_np.get(key)
        if arr is None:
            arr = self._masks_np[key] = np.array(self._combo_masks(s, kind, k), dtype=np.uint64)
        return arr

    def ensure_probed(self, s: int, t: HammingTuple) -> None:
        """Probe every bucket of substring tuple t in table s, once per query.

        Hits are queued as bucket rows; flush() verifies them.
        """
        probed = self.probed[s]
        if t in probed:
            return
        probed.add(t)
        a, b = t
        if a > len(self.sub_ones[s]) or b > len(self.sub_zeros[s]):
            return  # tuple invalid for this substring's popcount
        index = self.index
        sv = self.sub_values[s]
        clear_masks = self._combo_masks(s, 1, a)
        set_masks = self._combo_masks(s, 0, b)
        total = len(clear_masks) * len(set_masks)
        self.buckets_probed += total
        keys = index.table_keys[s]
        if total >= self._VECTOR_MIN and len(keys):
            # Bulk probe: the keys array is sorted, so bucket lookup is a
            # binary search over all candidate values at once.
            base = np.bitwise_xor(self._combo_masks_np(s, 1, a), np.uint64(sv))
            vals = np.bitwise_or(base[:, None], self._combo_masks_np(s, 0, b)).ravel()
            pos = np.searchsorted(keys, vals)
            np.minimum(pos, len(keys) - 1, out=pos)
            rows = pos[keys[pos] == vals]
            if rows.size:
                self._pending_np[s].append(rows)
        else:
            get = index.table_maps[s].get
            pend = self._pending[s].append
            for m1 in clear_masks:
                base = sv ^ m1
                for m2 in set_masks:
                    row = get(base | m2)
                    if row is not None:
                        pend(row)

    def flush(self) -> None:
        """Verify queued bucket hits: compute full tuples for new ids in bulk."""
        index = self.index
        gathered = []
        for s in range(index.m):
            arrs = self._pending_np[s]
            rows_py = self._pending[s]
            if not arrs and not rows_py:
                continue
            self._pending_np[s] = []
            self._pending[s] = []
            if rows_py:
                arrs = arrs + [np.array(rows_py, dtype=np.int64)]
            r = arrs[0] if len(arrs) == 1 else np.concatenate(arrs)
            r = r.astype(np.int64, copy=False)
            counts = index.table_counts[s][r]
            total = int(counts.sum())
            if not total:
                continue
            base = np.repeat(index.table_starts[s][r], counts)
            within = np.arange(total, dtype=np.int64) - np.repeat(np.cumsum(counts) - counts, counts)
            gathered.append(index.table_ids[s][base + within])
        if not gathered:
            return
        ids = np.unique(np.concatenate(gathered)) if len(gathered) > 1 else np.unique(gathered[0])
        ids = ids[~self._seen[ids]]
        if not ids.size:
            return
        self._seen[ids] = True
        self.candidates_checked += ids.size
        dots = np.bitwise_count(index.words[ids] & self.q_words).sum(axis=1, dtype=np.int64)
        r1s = self.z - dots
        r2s = index.pops_np[ids] - dots
        # Group by full tuple in one sort instead of a per-id dict loop.
        comp = r1s * (self.index.p + 1) + r2s
        order = np.argsort(comp, kind="stable")
        ids_sorted = ids[order]
        comp_sorted = comp[order]
        uniq, starts = np.unique(comp_sorted, return_index=True)
        ends = starts[1:].tolist() + [len(ids_sorted)]
        groups = self.groups
        span = self.index.p + 1
        for u, lo, hi in zip(uniq.tolist(), starts.tolist(), ends):
            key = divmod(u, span)
            chunk = ids_sorted[lo:hi].tolist()
            g = groups.get(key)
            if g is None:
                groups[key] = chunk
            else:
                g.extend(chunk)

    def pooled_ids(self) -> set[int]:
        """Every candidate pooled so far (the verified superset O)."""
        return set(np.flatnonzero(self._seen).tolist())


def rnn_amih(
    index: MultiIndex,
    q: BinaryCode,
    bound: HammingTuple,
    scratch: Optional[SearchScratch] = None,
) -> set[int]:
    """Exactly the ids whose full distance tuple is component-wise <= bound.

    Passing one scratch through a sequence of calls with growing bounds reuses
    all prior probing and verification work.
    """
    z = q.value.bit_count()
    validate_tuple(z, q.p, bound)
    if scratch is None:
        scratch = SearchScratch(index, q)
    elif scratch.index is not index or scratch.q.value != q.value:
        raise ValueError("scratch belongs to a different (index, query) pair")
    for t in candidate_tuples(bound, index.m):
        for s in range(index.m):
            scratch.ensure_probed(s, t)
    scratch.flush()
    r1, r2 = bound
    out: set[int] = set()
    for (a, b), ids in scratch.groups.items():
        if a <= r1 and b <= r2:
            out.update(ids)
    return out


def knn_amih(index: MultiIndex, q: BinaryCode, k: int) -> tuple[list[tuple[int, float]], QueryStats]:
    """Exact top-min(k, n) by cosine similarity through the substring tables.

    Walks full-length tuples in similarity order; before reporting a tuple
    class it probes whatever substring tuples that class still requires, so
    the pigeonhole superset guarantee applies to every class emitted.
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

    scratch = SearchScratch(index, q)
    seq = TupleSequence(z, q.p)
    m = index.m
    ensure = scratch.ensure_probed
    groups = scratch.groups
    out_groups: list[tuple[HammingTuple, list[int]]] = []
    collected = 0
    for t in seq:
        for sub in candidate_tuples(t, m):
            for s in range(m):
                ensure(s, sub)
        scratch.flush()
        found = groups.get(t)
        if found:
            found = sorted(found)
            out_groups.append((t, found))
            collected += len(found)
        if collected >= k or collected == n:
            break

    stats.tuples_emitted = seq.emitted_count
    stats.entered_anchor_phase = seq.entered_anchor_phase
    stats.buckets_probed = scratch.buckets_probed
    stats.candidates_checked = scratch.candidates_checked

    out: list[tuple[int, float]] = []
    limit = min(k, n)
    for t, ids in out_groups:
        sim = tuple_similarity(z, t.r1, t.r2)
        for i in ids:
            if len(out) == limit:
                break
            out.append((i, sim))
            stats.boundary_tuple = t
    stats.time_ns = time.perf_counter_ns() - start
    return out, stats
