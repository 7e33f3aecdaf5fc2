"""Acceptance suite: one test per criterion, each printing a PASS line.

Run with `pytest tests/test_acceptance.py -v -s`.  The trend check
(criterion 7) builds a million-item dataset and takes the longest; the whole
module is sized for a few minutes on a laptop.
"""

import re
import subprocess
import sys
import time
from math import comb

import numpy as np

from abcsearch import (
    BinaryCode,
    Dataset,
    HammingTuple,
    SearchScratch,
    TupleSequence,
    bucket_count,
    build_amih,
    build_single,
    compare_sim,
    enumerate_bucket_indices,
    gen_dataset,
    knn_amih,
    knn_single,
    linear_scan_knn,
    load_index,
    oracle_tuple_order,
    probing_bound,
    rnn_amih,
    save_index,
    write_dataset,
)
from abcsearch.bench import virtual_single_probe_stats


def report(criterion: int, name: str):
    print(f"\nACCEPTANCE {criterion} {name}: PASS")


def drawn_queries(ds: Dataset, rng, count: int) -> list[BinaryCode]:
    out = []
    n, p = len(ds), ds.p
    for j in range(count):
        if j % 2 == 0:
            q = ds.code(int(rng.integers(n)))
        else:
            q = BinaryCode(p, int.from_bytes(rng.bytes((p + 7) // 8), "little") & ((1 << p) - 1))
        if q.value:
            out.append(q)
    return out


def test_criterion_1_exactness():
    t0 = time.perf_counter()
    rng = np.random.default_rng(2024)
    instances = 0
    for p in (16, 32, 64):
        for n in (1000, 10000):
            for seed in (0, 1):
                ds = gen_dataset(n, p, 0.5, seed=seed * 31 + n + p)
                amih = build_amih(ds)
                single = build_single(ds) if p == 16 else None
                for q in drawn_queries(ds, rng, 8):
                    for k in (1, 10, 100):
                        oracle = linear_scan_knn(ds, q, k)
                        oracle_sims = sorted((s for _, s in oracle), reverse=True)
                        got, _ = knn_amih(amih, q, k)
                        assert sorted((s for _, s in got), reverse=True) == oracle_sims
                        assert got == oracle
                        instances += 1
                        if single is not None:
                            got_s, _ = knn_single(single, q, k)
                            assert sorted((s for _, s in got_s), reverse=True) == oracle_sims
                            assert got_s == oracle
                            instances += 1
    # The single-table engine at p=32 on sparse random data: probing cost
    # (millions of buckets per query) limits it to K=1 spot checks with
    # out-of-dataset queries.
    for seed in (0, 1):
        ds = gen_dataset(10000, 32, 0.5, seed=seed)
        single = build_single(ds)
        q = gen_dataset(1, 32, 0.5, seed=seed + 555).code(0)
        got, stats = knn_single(single, q, 1)
        assert got == linear_scan_knn(ds, q, 1)
        assert stats.buckets_probed > 1
        instances += 1
    elapsed = time.perf_counter() - t0
    assert instances >= 300, instances
    assert elapsed < 120, f"{elapsed:.1f}s"
    report(1, f"exactness ({instances} instances, {elapsed:.1f}s)")


def test_criterion_2_probing_order():
    t0 = time.perf_counter()
    for p in range(1, 21):
        for z in range(1, p + 1):
            got = [tuple(t) for t in TupleSequence(z, p)]
            assert got == [tuple(t) for t in oracle_tuple_order(z, p)], (z, p)
    for p in range(21, 25):
        for z in range(1, p + 1):
            seq = list(TupleSequence(z, p))
            for a, b in zip(seq, seq[1:]):
                assert compare_sim(z, a, b) >= 0, (z, p, a, b)
    elapsed = time.perf_counter() - t0
    assert elapsed < 60, f"{elapsed:.1f}s"
    report(2, f"probing order vs oracle ({elapsed:.1f}s)")


def test_criterion_3_completeness():
    for p in range(1, 25):
        for z in range(p + 1):
            seq = list(TupleSequence(z, p))
            assert len(seq) == (z + 1) * (p - z + 1), (z, p)
            assert len(set(seq)) == len(seq), (z, p)
    report(3, "completeness (exhaustion counts, no duplicates)")


def test_criterion_4_bucket_counts_partition():
    rng = np.random.default_rng(4)
    for p in range(1, 13):
        z_values = range(p + 1) if p <= 9 else rng.choice(p + 1, size=5, replace=False)
        for z in z_values:
            z = int(z)
            bits = [1] * z + [0] * (p - z)
            rng.shuffle(bits)
            q = BinaryCode.from_bits(bits)
            seen = set()
            for r1 in range(z + 1):
                for r2 in range(p - z + 1):
                    t = HammingTuple(r1, r2)
                    chunk = [c.value for c in enumerate_bucket_indices(q, t)]
                    assert len(chunk) == bucket_count(z, p, t)
                    seen.update(chunk)
            assert len(seen) == 1 << p, (z, p)
    report(4, "bucket counts and code-space partition (p <= 12)")


def test_criterion_5_ball_separation():
    rng = np.random.default_rng(5)
    checked = 0
    while checked < 10**5:
        z = int(rng.integers(1, 257))
        p = z + int(rng.integers(0, 65))
        r = int(rng.integers(1, 13))
        t = int(rng.integers(1, 41))
        if r + t > p or z * t <= r * (r + t):
            continue
        ball = [
            HammingTuple(r1, d - r1)
            for d in range(r + 1)
            for r1 in range(max(0, d - (p - z)), min(d, z) + 1)
        ]
        far = [
            HammingTuple(r1, r + t - r1)
            for r1 in range(max(0, r + t - (p - z)), min(r + t, z) + 1)
        ]
        worst_near = ball[0]
        for u in ball[1:]:
            if compare_sim(z, u, worst_near) < 0:
                worst_near = u
        best_far = far[0]
        for v in far[1:]:
            if compare_sim(z, v, best_far) > 0:
                best_far = v
        assert compare_sim(z, worst_near, best_far) == 1, (z, p, r, t)
        checked += 1
    report(5, "ball-vs-outer-layer separation (1e5 triples, exact comparator)")


def feasible_bound(rng, p, m, z):
    """Random (r1, r2) with r1+r2 <= p/3, capped so the instance stays
    enumerable (the ceiling itself grows near-exponentially in the radius)."""
    w = -(-p // m)
    rmax, total = 0, 0
    while rmax < w and total + comb(w, rmax + 1) <= 60000:
        rmax += 1
        total += comb(w, rmax)
    s_cap = min(p // 3, m * rmax + m - 1)
    s = int(rng.integers(0, s_cap + 1))
    r1 = int(rng.integers(max(0, s - (p - z)), min(s, z) + 1))
    return HammingTuple(r1, s - r1)


def test_criterion_6_superset_and_ceiling():
    rng = np.random.default_rng(6)
    configs = [(p, m, 1000, seed) for p in (32, 64) for m, seed in zip(range(2, 7), range(5))]
    configs += [(32, 4, 10000, 9), (64, 3, 10000, 9)]
    checked = 0
    per_config = -(-500 // len(configs))
    for p, m, n, seed in configs:
        ds = gen_dataset(n, p, 0.5, seed=seed + p)
        index = build_amih(ds, m)
        words, pops = ds.words, ds.popcount_array()
        for _ in range(per_config):
            q = ds.code(int(rng.integers(n)))
            z = q.popcount()
            if z == 0:
                continue
            bound = feasible_bound(rng, p, m, z)
            scratch = SearchScratch(index, q)
            got = rnn_amih(index, q, bound, scratch)

            dots = np.bitwise_count(words & np.array(q.words, dtype=np.uint64)).sum(axis=1, dtype=np.int64)
            truth_mask = ((z - dots) <= bound.r1) & ((pops - dots) <= bound.r2)
            truth = set(np.flatnonzero(truth_mask).tolist())
            assert got == truth
            assert scratch.pooled_ids() >= truth

            radius = (bound.r1 + bound.r2) // m
            per_span_ball = sum(
                sum(comb(width, j) for j in range(min(radius, width) + 1))
                for _, width in index.spans
            )
            assert scratch.buckets_probed <= per_span_ball
            assert per_span_ball <= probing_bound(p, m, bound) + 1e-6
            checked += 1
    assert checked >= 500, checked
    report(6, f"pigeonhole superset and probing ceiling ({checked} instances)")


def test_criterion_7_scaled_trend():
    t0 = time.perf_counter()
    ds = gen_dataset(10**6, 64, 0.5, seed=7)
    ds.values, ds.pops  # move lazy conversion out of the timed sections
    queries = [q for q in gen_dataset(12, 64, 0.5, seed=70).codes() if q.value]

    # Single-table probings at n=1e5 dwarf the dataset size.
    prefix = ds.prefix(10**5)
    probed = [virtual_single_probe_stats(prefix, q, 1)[0] for q in queries]
    mean_single = sum(probed) / len(probed)
    assert mean_single > 10**5, mean_single

    index = build_amih(ds)
    scan_ns = []
    for q in queries:
        t1 = time.perf_counter_ns()
        linear_scan_knn(ds, q, 1)
        scan_ns.append(time.perf_counter_ns() - t1)
    amih_ns, work = [], []
    for q in queries:
        t1 = time.perf_counter_ns()
        _, stats = knn_amih(index, q, 1)
        amih_ns.append(time.perf_counter_ns() - t1)
        work.append(stats.buckets_probed + stats.candidates_checked)

    mean_work = sum(work) / len(work)
    assert mean_work < 10**6 / 2, mean_work
    speedup = np.mean(scan_ns) / np.mean(amih_ns)
    assert speedup > 1.0, speedup
    elapsed = time.perf_counter() - t0
    assert elapsed < 1800, f"{elapsed:.0f}s"
    report(
        7,
        "scaled trend (single probes %.2e > 1e5; amih work %.0f < n/2; speedup %.1fx; %.0fs)"
        % (mean_single, mean_work, speedup, elapsed),
    )


def strip_time(text: str) -> str:
    return re.sub(r'"time_ns": \d+', '"time_ns": 0', text)


def run_cli(*args):
    proc = subprocess.run(
        [sys.executable, "-m", "abcsearch.cli", *map(str, args)],
        capture_output=True,
        text=True,
    )
    assert proc.returncode == 0, proc.stderr
    return proc


def test_criterion_8_roundtrip_and_determinism(tmp_path):
    ds = gen_dataset(5000, 64, 0.5, seed=8)
    index = build_amih(ds)
    path = tmp_path / "i.abcx"
    save_index(path, index)
    loaded = load_index(path)
    queries = [q for q in gen_dataset(101, 64, 0.5, seed=80).codes() if q.value][:100]
    assert len(queries) == 100
    for q in queries:
        a, _ = knn_amih(index, q, 10)
        b, _ = knn_amih(loaded, q, 10)
        assert a == b

    data = tmp_path / "d.abc"
    write_dataset(data, ds.prefix(2000))
    write_dataset(tmp_path / "q.abc", Dataset.from_codes(queries[:10]))
    outputs = []
    for trial in (1, 2):
        idx = tmp_path / f"i{trial}.abcx"
        run_cli("build", data, "--engine", "amih", "--out", idx)
        res = tmp_path / f"r{trial}.jsonl"
        run_cli("query", "--index", idx, "--queries", tmp_path / "q.abc", "--k", 5, "--out", res)
        outputs.append((idx.read_bytes(), strip_time(res.read_text())))
    assert outputs[0] == outputs[1]
    report(8, "snapshot round-trip (100 queries) and CLI determinism")
