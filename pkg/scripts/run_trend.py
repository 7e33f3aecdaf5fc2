#!/usr/bin/env python3
"""Scaled-down query-time growth experiment.

Sweeps dataset prefix sizes for the three engines and writes the bench CSV:
linear-scan time should grow linearly with n, the multi-index engine
sublinearly, and single-table probing counts should overtake n once the
table is sparse.  Example:

    python scripts/run_trend.py --n 1000000 --p 64 --queries 20 --out trend.csv
"""

import argparse
import sys
import time

from abcsearch.bench import run_bench, write_csv
from abcsearch.dataset import gen_dataset


def main() -> int:
    ap = argparse.ArgumentParser(description=__doc__, formatter_class=argparse.RawDescriptionHelpFormatter)
    ap.add_argument("--n", type=int, default=10**6, help="full dataset size")
    ap.add_argument("--p", type=int, default=64)
    ap.add_argument("--density", type=float, default=0.5)
    ap.add_argument("--seed", type=int, default=0)
    ap.add_argument("--queries", type=int, default=20)
    ap.add_argument("--ks", type=lambda s: [int(x) for x in s.split(",")], default=[1, 10, 100])
    ap.add_argument("--out", default="trend.csv")
    args = ap.parse_args()

    sizes = []
    size = 10**4
    while size < args.n:
        sizes.append(size)
        size *= 10
    sizes.append(args.n)

    t0 = time.perf_counter()
    print(f"generating {args.n} x {args.p}-bit codes ...", file=sys.stderr)
    ds = gen_dataset(args.n, args.p, args.density, args.seed)
    ds.values, ds.pops  # pay the unpacking cost before any timing starts
    print(f"  {time.perf_counter() - t0:.1f}s", file=sys.stderr)

    rows = run_bench(
        ds,
        engines=["scan", "single", "amih"],
        ks=args.ks,
        sizes=sizes,
        n_queries=args.queries,
        seed=args.seed,
    )
    write_csv(args.out, rows)
    print(f"wrote {args.out} ({len(rows)} rows)", file=sys.stderr)

    # Scan time is expected to be nearly flat in K (it always touches every
    # item); report the observed ratio at the largest size.
    scan = {r.k: r.mean_time_ns for r in rows if r.engine == "scan" and r.n == args.n}
    if len(scan) > 1:
        ks = sorted(scan)
        ratio = scan[ks[-1]] / scan[ks[0]]
        print(f"scan K={ks[-1]} / K={ks[0]} time ratio: {ratio:.2f} (expect <= 1.5)", file=sys.stderr)

    for r in rows:
        if r.engine == "amih" and r.speedup_vs_scan:
            print(f"amih n={r.n} K={r.k}: speedup {r.speedup_vs_scan:.1f}x vs scan", file=sys.stderr)
    return 0


if __name__ == "__main__":
    sys.exit(main())
