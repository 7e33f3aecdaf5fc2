"""Exact linear-scan baseline and the brute-force tuple-order oracle.

The scan hoists everything query-dependent out of the inner loop: with
z = popcount(q) fixed, an item's similarity is dot / (sqrt(z) * sqrt(norm)),
where dot = popcount(q AND b) and norm = popcount(b), so the loop needs one
AND, one popcount, and a table lookup per item.
"""

from __future__ import annotations

from heapq import heappush, heapreplace

from .core import BinaryCode, HammingTuple, sim_key, tuple_similarity
from .dataset import as_dataset


def linear_scan_knn(dataset, q: BinaryCode, k: int) -> list[tuple[int, float]]:
    """Exact top-min(k, n) items by cosine similarity, ranked deterministically.

    Ties in similarity break by smaller Hamming distance, then smaller r1,
    then smaller id.  Selection keeps a bounded heap of size k instead of
    sorting the whole dataset.
    """
    if k < 1:
        raise ValueError("k must be at least 1")
    values, pops, p = as_dataset(dataset, expect_p=q.p)
    z = q.value.bit_count()
    if z == 0:
        raise ValueError("zero-norm query: cosine similarity is undefined")

    # Heap entries are "goodness" keys: larger = better ranked.  The leading
    # component is sim^2 = dot^2 / (z * norm) evaluated with one float
    # division.  Both operands are exact integers <= 4096^2 < 2^53, and
    # distinct rationals a/b != c/d with b, d <= 2^24 differ by >= 2^-48,
    # far above the <= 2^-52 rounding error, so the float never reorders or
    # falsely merges similarity classes (ties get identical floats).
    qv = q.value
    n = len(values)
    fill = min(k, n)
    heap: list[tuple[float, int, int, int]] = []
    for i in range(fill):
        bv = values[i]
        dot = (qv & bv).bit_count()
        norm = pops[i]
        sim_sq = (dot * dot) / (z * norm) if norm else 0.0
        # distance = z + norm - 2*dot and r1 = z - dot, up to constants.
        heappush(heap, (sim_sq, 2 * dot - norm, dot, -i))
    if heap:
        floor_key = heap[0]
        floor_sq = floor_key[0]
    for i in range(fill, n):
        bv = values[i]
        dot = (qv & bv).bit_count()
        norm = pops[i]
        sim_sq = (dot * dot) / (z * norm) if norm else 0.0
        if sim_sq < floor_sq:
            continue
        entry = (sim_sq, 2 * dot - norm, dot, -i)
        if entry > floor_key:
            heapreplace(heap, entry)
            floor_key = heap[0]
            floor_sq = floor_key[0]

    ranked = sorted(heap, reverse=True)
    out = []
    for sim_sq, _, dot, neg_i in ranked:
        i = -neg_i
        r1 = z - dot
        r2 = pops[i] - dot
        out.append((i, tuple_similarity(z, r1, r2)))
    return out


def oracle_tuple_order(z: int, p: int) -> list[HammingTuple]:
    """All valid tuples sorted by (similarity desc, distance asc, r1 asc).

    Brute-force reference for the probing sequence; guarded to small sizes
    because it materializes and sorts every tuple.
    """
    if not 1 <= z <= p <= 24:
        raise ValueError("oracle requires 1 <= z <= p <= 24")
    tuples = [HammingTuple(r1, r2) for r1 in range(z + 1) for r2 in range(p - z + 1)]
    tuples.sort(key=lambda t: sim_key(z, t))
    return tuples
