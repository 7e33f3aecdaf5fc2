"""Command-line front end: dataset generation, index build/load, querying,
and benchmark sweeps.

Exit codes: 0 success, 2 usage error, 1 data error.  ABC_THREADS caps
benchmark parallelism.
"""

from __future__ import annotations

import argparse
import json
import os
import sys
import time

from .amih import MultiIndex, build_amih, knn_amih
from .bench import run_bench, write_csv
from .core import MAX_CODE_LENGTH
from .dataset import FormatError, gen_dataset, read_dataset, write_dataset
from .single_index import build_single, knn_single
from .snapshot import load_index, save_index


def _positive(kind):
    def parse(text):
        v = kind(text)
        if v <= 0:
            raise argparse.ArgumentTypeError(f"must be positive, got {text}")
        return v

    return parse


def _nonneg_int(text):
    v = int(text)
    if v < 0:
        raise argparse.ArgumentTypeError(f"must be nonnegative, got {text}")
    return v


def _code_length(text):
    v = int(text)
    if not 1 <= v <= MAX_CODE_LENGTH:
        raise argparse.ArgumentTypeError(f"must be in [1, {MAX_CODE_LENGTH}], got {text}")
    return v


def _density(text):
    v = float(text)
    if not 0.0 < v < 1.0:
        raise argparse.ArgumentTypeError(f"must be in (0, 1), got {text}")
    return v


def _int_list(text):
    try:
        return [int(x) for x in text.split(",") if x]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated integers, got {text!r}")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="abcsearch",
        description="Exact angular K-nearest-neighbor search over packed binary codes.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p_gen = sub.add_parser("gen", help="generate a random dataset file")
    p_gen.add_argument("--n", type=_nonneg_int, required=True, help="number of codes (>= 0)")
    p_gen.add_argument("--p", type=_code_length, required=True, help="code length in bits")
    p_gen.add_argument("--density", type=_density, default=0.5, help="per-bit set probability in (0,1)")
    p_gen.add_argument("--seed", type=int, default=0)
    p_gen.add_argument("--out", required=True)

    p_build = sub.add_parser("build", help="build an index snapshot from a dataset file")
    p_build.add_argument("dataset")
    p_build.add_argument("--engine", choices=["single", "amih"], required=True)
    p_build.add_argument("--m", type=_positive(int), default=None, help="substring tables (amih)")
    p_build.add_argument("--force", action="store_true", help="allow single-table builds with p > 32")
    p_build.add_argument("--out", required=True)

    p_query = sub.add_parser("query", help="answer KNN queries from an index snapshot")
    p_query.add_argument("--index", required=True)
    p_query.add_argument("--queries", required=True, help="dataset file of query codes")
    p_query.add_argument("--k", type=_positive(int), required=True)
    p_query.add_argument("--out", default="-", help="output path, '-' for stdout")

    p_bench = sub.add_parser("bench", help="run engine/size/K sweeps, emit CSV")
    p_bench.add_argument("--index-or-dataset", required=True, dest="source")
    p_bench.add_argument("--engines", default="scan,amih", help="comma list of scan,single,amih")
    p_bench.add_argument("--ks", type=_int_list, default=[1])
    p_bench.add_argument("--sizes", type=_int_list, default=None, help="dataset prefix sizes")
    p_bench.add_argument("--queries", type=_positive(int), default=1000)
    p_bench.add_argument("--seed", type=int, default=0)
    p_bench.add_argument("--out", default="-", help="CSV path, '-' for stdout")
    return parser


def cmd_gen(args) -> int:
    ds = gen_dataset(args.n, args.p, args.density, args.seed)
    write_dataset(args.out, ds)
    return 0


def cmd_build(args, parser) -> int:
    ds = read_dataset(args.dataset)
    if args.engine == "single" and ds.p > 32 and not args.force:
        parser.error(f"single-table index over p={ds.p} > 32 bit codes; pass --force to override")
    t0 = time.perf_counter()
    if args.engine == "single":
        index = build_single(ds)
    else:
        index = build_amih(ds, args.m)
    build_s = time.perf_counter() - t0
    save_index(args.out, index)
    report = {
        "engine": args.engine,
        "n": index.n,
        "p": index.p,
        "m": getattr(index, "m", 1),
        "build_seconds": round(build_s, 6),
        "index_bytes": os.path.getsize(args.out),
    }
    print(json.dumps(report), file=sys.stderr)
    return 0


def format_result_line(query_id: int, neighbors, stats) -> str:
    """One JSON object per query; similarities printed with 17 significant digits."""
    items = ", ".join(f'{{"id": {i}, "sim": {sim:.17g}}}' for i, sim in neighbors)
    anchor = "true" if stats.entered_anchor_phase else "false"
    return (
        f'{{"query_id": {query_id}, "neighbors": [{items}], '
        f'"stats": {{"buckets_probed": {stats.buckets_probed}, '
        f'"candidates_checked": {stats.candidates_checked}, '
        f'"tuples_emitted": {stats.tuples_emitted}, '
        f'"entered_anchor_phase": {anchor}, '
        f'"time_ns": {stats.time_ns}}}}}'
    )


def cmd_query(args) -> int:
    index = load_index(args.index)
    queries = read_dataset(args.queries)
    if queries.p != index.p:
        raise FormatError(f"query file p={queries.p} does not match index p={index.p}")
    knn = knn_amih if isinstance(index, MultiIndex) else knn_single

    out = sys.stdout if args.out == "-" else open(args.out, "w")
    try:
        for qid, q in enumerate(queries.codes()):
            if q.value == 0:
                out.write(json.dumps({"query_id": qid, "error": "zero-norm query"}) + "\n")
                continue
            neighbors, stats = knn(index, q, args.k)
            out.write(format_result_line(qid, neighbors, stats) + "\n")
    finally:
        if out is not sys.stdout:
            out.close()
    return 0


def cmd_bench(args, parser) -> int:
    with open(args.source, "rb") as f:
        magic = f.read(4)
    if magic == b"ABCX":
        index = load_index(args.source)
        from .dataset import Dataset
        from .snapshot import _words_array

        ds = Dataset(index.p, _words_array(index.values, index.p))
        default_sizes = [index.n]
    elif magic == b"ABC1":
        ds = read_dataset(args.source)
        default_sizes = [len(ds)]
    else:
        raise FormatError(f"unrecognized magic {magic!r} in {args.source}")

    engines = [e for e in args.engines.split(",") if e]
    sizes = args.sizes if args.sizes else default_sizes
    try:
        rows = run_bench(ds, engines, args.ks, sizes, n_queries=args.queries, seed=args.seed)
    except ValueError as e:
        parser.error(str(e))
    if args.out == "-":
        write_csv(sys.stdout, rows)
    else:
        write_csv(args.out, rows)
    return 0


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        if args.command == "gen":
            return cmd_gen(args)
        if args.command == "build":
            return cmd_build(args, parser)
        if args.command == "query":
            return cmd_query(args)
        if args.command == "bench":
            return cmd_bench(args, parser)
    except (FormatError, ValueError, OSError) as e:
        print(f"error: {e}", file=sys.stderr)
        return 1
    raise AssertionError("unreachable")


if __name__ == "__main__":
    sys.exit(main())
