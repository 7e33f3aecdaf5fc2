"""On-disk index snapshots for both engines.

Snapshot layout (all little-endian):

    offset  size  field
    0       4     magic "ABCX"
    4       4     format version, uint32 = 1
    8       4     engine, uint32: 0 = single table, 1 = multi-index
    12      4     p, uint32
    16      4     m, number of tables, uint32 (1 for the single engine)
    20      8     n, uint64
    28      8*m   span table: m pairs (offset uint32, width uint32)

After the span table, for each table s:

    n_keys   uint64
    keys     n_keys uint64 (sorted ascending substring values)
    counts   n_keys uint64
    ids      n uint64 (item ids grouped by bucket, ascending key order)

followed by the dataset body: n records of ceil(p/64) uint64 words, the same
record format as a dataset file.  Loading rebuilds the in-memory tables, so a
loaded index answers every query identically to the one that was saved.
"""

from __future__ import annotations

import struct

import numpy as np

from .amih import MultiIndex, substring_spans
from .dataset import Dataset, FormatError, words_per_code
from .single_index import DENSE_TABLE_MAX_BITS, HashIndex, build_single

SNAPSHOT_MAGIC = b"ABCX"
SNAPSHOT_VERSION = 1
ENGINE_SINGLE = 0
ENGINE_AMIH = 1
_HEADER = struct.Struct("<4sIIIIQ")


def _csr_from_values(values: list[int]) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    arr = np.array(values, dtype=np.uint64) if values else np.zeros(0, dtype=np.uint64)
    order = np.argsort(arr, kind="stable")
    keys, _, counts = np.unique(arr[order], return_index=True, return_counts=True)
    return keys, counts.astype(np.uint64), order.astype(np.uint64)


def _words_array(values: list[int], p: int) -> np.ndarray:
    w = words_per_code(p)
    out = np.zeros((len(values), w), dtype=np.uint64)
    mask = 0xFFFFFFFFFFFFFFFF
    for i, v in enumerate(values):
        for j in range(w):
            out[i, j] = (v >> (64 * j)) & mask
    return out


def save_index(path, index) -> None:
    if isinstance(index, HashIndex):
        if index.p is None:
            raise ValueError("cannot snapshot an index with unknown code length")
        if index.p > 64:
            raise ValueError("single-table snapshots support at most 64-bit codes")
        engine, p, m, spans = ENGINE_SINGLE, index.p, 1, [(0, index.p)]
        tables = [_csr_from_values(index.values)]
        body = _words_array(index.values, p)
    elif isinstance(index, MultiIndex):
        engine, p, m, spans = ENGINE_AMIH, index.p, index.m, index.spans
        tables = [
            (index.table_keys[s], index.table_counts[s], index.table_ids[s])
            for s in range(m)
        ]
        body = index.words
    else:
        raise TypeError(f"not an index: {type(index).__name__}")

    n = index.n
    with open(path, "wb") as f:
        f.write(_HEADER.pack(SNAPSHOT_MAGIC, SNAPSHOT_VERSION, engine, p, m, n))
        for off, width in spans:
            f.write(struct.pack("<II", off, width))
        for keys, counts, ids in tables:
            f.write(struct.pack("<Q", len(keys)))
            f.write(keys.astype("<u8").tobytes())
            f.write(np.asarray(counts).astype("<u8").tobytes())
            f.write(np.asarray(ids).astype("<u8").tobytes())
        f.write(body.astype("<u8", copy=False).tobytes())


def load_index(path, dense_bits: int = DENSE_TABLE_MAX_BITS):
    """Rebuild a HashIndex or MultiIndex from a snapshot file."""
    with open(path, "rb") as f:
        raw = f.read()
    if len(raw) < _HEADER.size:
        raise FormatError("file too short for a snapshot header")
    magic, version, engine, p, m, n = _HEADER.unpack_from(raw)
    if magic != SNAPSHOT_MAGIC:
        raise FormatError(f"bad magic {magic!r}, expected {SNAPSHOT_MAGIC!r}")
    if version != SNAPSHOT_VERSION:
        raise FormatError(f"unsupported snapshot version {version}")
    if engine not in (ENGINE_SINGLE, ENGINE_AMIH):
        raise FormatError(f"unknown engine tag {engine}")

    pos = _HEADER.size
    spans = []
    try:
        for _ in range(m):
            off, width = struct.unpack_from("<II", raw, pos)
            spans.append((off, width))
            pos += 8
        expected_spans = substring_spans(p, m)
    except (struct.error, ValueError) as e:
        raise FormatError(str(e)) from None
    if spans != expected_spans:
        raise FormatError("span table does not match the balanced partition of p")

    tables = []
    try:
        for _ in range(m):
            (n_keys,) = struct.unpack_from("<Q", raw, pos)
            pos += 8
            keys = np.frombuffer(raw, dtype="<u8", count=n_keys, offset=pos).astype(np.uint64)
            pos += 8 * n_keys
            counts = np.frombuffer(raw, dtype="<u8", count=n_keys, offset=pos).astype(np.int64)
            pos += 8 * n_keys
            ids = np.frombuffer(raw, dtype="<u8", count=n, offset=pos).astype(np.int64)
            pos += 8 * n
            if counts.sum() != n:
                raise FormatError("bucket counts do not sum to the item count")
            if len(keys) > 1 and not (keys[1:] > keys[:-1]).all():
                raise FormatError("table keys must be strictly increasing")
            if len(ids) and (ids.max() >= n or ids.min() < 0):
                raise FormatError("item id out of range")
            tables.append((keys, counts, ids))
    except (struct.error, ValueError) as e:
        if isinstance(e, FormatError):
            raise
        raise FormatError(f"truncated or malformed table section: {e}") from None

    w = words_per_code(p)
    body = raw[pos:]
    if len(body) != n * w * 8:
        raise FormatError(f"code store is {len(body)} bytes, expected {n * w * 8}")
    try:
        ds = Dataset(p, np.frombuffer(body, dtype="<u8").reshape(n, w).astype(np.uint64))
    except ValueError as e:
        raise FormatError(str(e)) from None

    if engine == ENGINE_SINGLE:
        return build_single(ds, dense_bits=dense_bits)
    index = MultiIndex(ds, m)
    for keys, counts, ids in tables:
        starts = np.concatenate(([0], np.cumsum(counts)[:-1])) if len(counts) else counts
        index._install_table(keys, starts, counts, ids)
    return index
