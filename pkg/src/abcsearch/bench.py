"""Benchmark runs: query-time and probing statistics across engines and sizes.

Rows are produced per (engine, prefix size, K).  Size sweeps reuse prefixes
of one dataset so the curves over n are nested.  The single-table engine is
executed for real only on short codes; on longer codes its bucket probings
are computed by accounting (sum of per-tuple bucket counts up to the stopping
tuple, which equals what a real run would report) because actually
enumerating those buckets is exactly the cost explosion the multi-index
engine exists to avoid.  Such rows carry empty time fields.
"""

from __future__ import annotations

import csv
import os
import statistics
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from typing import Optional

import numpy as np

from .amih import build_amih, knn_amih
from .core import BinaryCode, bucket_count
from .dataset import Dataset, gen_dataset
from .probing import TupleSequence
from .scan import linear_scan_knn
from .single_index import build_single, knn_single

SINGLE_EXECUTE_MAX_BITS = 24

CSV_COLUMNS = [
    "engine",
    "n",
    "K",
    "mean_time_ns",
    "mean_buckets_probed",
    "mean_candidates",
    "pct_anchor_phase",
    "speedup_vs_scan",
]


@dataclass
class BenchRow:
    engine: str
    n: int
    k: int
    mean_time_ns: Optional[float]
    mean_buckets_probed: Optional[float]
    mean_candidates: Optional[float]
    pct_anchor_phase: Optional[float]
    speedup_vs_scan: Optional[float] = None

    def as_csv(self) -> list[str]:
        def fmt(x):
            return "" if x is None else repr(float(x))

        return [
            self.engine,
            str(self.n),
            str(self.k),
            fmt(self.mean_time_ns),
            fmt(self.mean_buckets_probed),
            fmt(self.mean_candidates),
            fmt(self.pct_anchor_phase),
            fmt(self.speedup_vs_scan),
        ]


def thread_cap() -> int:
    """Worker cap from ABC_THREADS; defaults to 1 (sequential)."""
    raw = os.environ.get("ABC_THREADS", "1")
    try:
        cap = int(raw)
    except ValueError:
        raise ValueError(f"ABC_THREADS must be an integer, got {raw!r}") from None
    return max(1, cap)


def bench_queries(n_queries: int, p: int, seed: int) -> list[BinaryCode]:
    """Deterministic query set; zero-norm draws are dropped (engines reject them)."""
    qs = gen_dataset(n_queries, p, 0.5, seed=seed ^ 0x5EED)
    return [c for c in qs.codes() if c.value != 0]


def virtual_single_probe_stats(prefix: Dataset, q: BinaryCode, k: int):
    """(buckets_probed, tuples_emitted, candidates, entered_anchor) of a
    single-table KNN run, without enumerating any bucket.

    A real run probes whole tuple classes in sequence order and stops at the
    first class boundary with >= k items retrieved, so its bucket count is
    the sum of bucket_count over the emitted tuples.  The per-class item
    counts come from a vectorized census of the dataset.
    """
    z = q.value.bit_count()
    if z == 0:
        raise ValueError("zero-norm query: cosine similarity is undefined")
    p = prefix.p
    q_words = np.array(q.words, dtype=np.uint64)
    dots = np.bitwise_count(prefix.words & q_words).sum(axis=1, dtype=np.int64)
    pops = prefix.popcount_array()
    flat = (z - dots) * (p - z + 1) + (pops - dots)
    census = np.bincount(flat, minlength=(z + 1) * (p - z + 1))

    n = len(prefix)
    seq = TupleSequence(z, p)
    probed = 0
    collected = 0
    emitted = 0
    for t in seq:
        emitted += 1
        probed += bucket_count(z, p, t)
        collected += int(census[t.r1 * (p - z + 1) + t.r2])
        if collected >= k or collected == n:
            break
    return probed, emitted, collected, seq.entered_anchor_phase


def _mean(xs) -> Optional[float]:
    xs = list(xs)
    return statistics.fmean(xs) if xs else None


def _run_queries(fn, queries, workers: int) -> list:
    if workers <= 1 or len(queries) <= 1:
        return [fn(q) for q in queries]
    with ThreadPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(fn, queries))


def run_bench(
    dataset: Dataset,
    engines: list[str],
    ks: list[int],
    sizes: list[int],
    n_queries: int = 1000,
    seed: int = 0,
    workers: Optional[int] = None,
) -> list[BenchRow]:
    for e in engines:
        if e not in ("scan", "single", "amih"):
            raise ValueError(f"unknown engine {e!r}")
    for s in sizes:
        if not 0 < s <= len(dataset):
            raise ValueError(f"size {s} out of range for dataset of {len(dataset)}")
    workers = thread_cap() if workers is None else max(1, workers)
    queries = bench_queries(n_queries, dataset.p, seed)

    rows: list[BenchRow] = []
    for size in sorted(sizes):
        prefix = dataset.prefix(size)
        scan_time_by_k: dict[int, float] = {}

        if "scan" in engines:
            values, pops = prefix.values, prefix.pops
            for k in ks:
                def scan_one(q, _k=k):
                    t0 = time.perf_counter_ns()
                    linear_scan_knn(prefix, q, _k)
                    return time.perf_counter_ns() - t0

                times = _run_queries(scan_one, queries, workers)
                mean_t = _mean(times)
                scan_time_by_k[k] = mean_t
                rows.append(
                    BenchRow("scan", size, k, mean_t, 0.0, float(len(prefix)), None)
                )

        if "single" in engines:
            if prefix.p <= SINGLE_EXECUTE_MAX_BITS:
                index = build_single(prefix)
                for k in ks:
                    results = _run_queries(lambda q, _k=k: knn_single(index, q, _k), queries, workers)
                    stats = [st for _, st in results]
                    rows.append(
                        BenchRow(
                            "single",
                            size,
                            k,
                            _mean(s.time_ns for s in stats),
                            _mean(s.buckets_probed for s in stats),
                            _mean(s.candidates_checked for s in stats),
                            100.0 * _mean(s.entered_anchor_phase for s in stats),
                        )
                    )
            else:
                for k in ks:
                    results = _run_queries(
                        lambda q, _k=k: virtual_single_probe_stats(prefix, q, _k), queries, workers
                    )
                    rows.append(
                        BenchRow(
                            "single",
                            size,
                            k,
                            None,
                            _mean(float(r[0]) for r in results),
                            _mean(float(r[2]) for r in results),
                            100.0 * _mean(r[3] for r in results),
                        )
                    )

        if "amih" in engines:
            index = build_amih(prefix)
            for k in ks:
                results = _run_queries(lambda q, _k=k: knn_amih(index, q, _k), queries, workers)
                stats = [st for _, st in results]
                rows.append(
                    BenchRow(
                        "amih",
                        size,
                        k,
                        _mean(s.time_ns for s in stats),
                        _mean(s.buckets_probed for s in stats),
                        _mean(s.candidates_checked for s in stats),
                        100.0 * _mean(s.entered_anchor_phase for s in stats),
                    )
                )

    by_nk = {(r.n, r.k): r.mean_time_ns for r in rows if r.engine == "scan"}
    for r in rows:
        base = by_nk.get((r.n, r.k))
        if r.engine != "scan" and base is not None and r.mean_time_ns:
            r.speedup_vs_scan = base / r.mean_time_ns
    return rows


def write_csv(path_or_file, rows: list[BenchRow]) -> None:
    own = isinstance(path_or_file, (str, os.PathLike))
    f = open(path_or_file, "w", newline="") if own else path_or_file
    try:
        writer = csv.writer(f)
        writer.writerow(CSV_COLUMNS)
        for r in rows:
            writer.writerow(r.as_csv())
    finally:
        if own:
            f.close()
