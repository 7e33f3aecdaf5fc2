"""Exact angular K-nearest-neighbor search over packed binary codes."""

from .amih import (
    CandidateTupleSet,
    MultiIndex,
    SearchScratch,
    build_amih,
    candidate_tuples,
    default_m,
    knn_amih,
    partition,
    probing_bound,
    rnn_amih,
    substring_spans,
)
from .core import (
    MAX_CODE_LENGTH,
    BinaryCode,
    HammingTuple,
    SimKey,
    bucket_count,
    compare_sim,
    cosine_similarity,
    hamming_tuple,
    popcount,
    sim_key,
    tuple_similarity,
)
from .dataset import Dataset, FormatError, gen_dataset, read_dataset, write_dataset
from .probing import (
    TupleSequence,
    enumerate_bucket_indices,
    first_anchor,
    r_hat,
    second_anchor,
)
from .scan import linear_scan_knn, oracle_tuple_order
from .single_index import HashIndex, QueryStats, build_single, knn_single, rnn_tuple_single
from .snapshot import load_index, save_index

__version__ = "0.1.0"

__all__ = [
    "BinaryCode",
    "CandidateTupleSet",
    "Dataset",
    "FormatError",
    "HammingTuple",
    "HashIndex",
    "MAX_CODE_LENGTH",
    "MultiIndex",
    "QueryStats",
    "SearchScratch",
    "SimKey",
    "TupleSequence",
    "bucket_count",
    "build_amih",
    "build_single",
    "candidate_tuples",
    "compare_sim",
    "cosine_similarity",
    "default_m",
    "enumerate_bucket_indices",
    "first_anchor",
    "gen_dataset",
    "hamming_tuple",
    "knn_amih",
    "knn_single",
    "linear_scan_knn",
    "load_index",
    "oracle_tuple_order",
    "partition",
    "popcount",
    "probing_bound",
    "r_hat",
    "read_dataset",
    "rnn_amih",
    "rnn_tuple_single",
    "save_index",
    "second_anchor",
    "sim_key",
    "substring_spans",
    "tuple_similarity",
    "write_dataset",
]
