"""In-memory datasets of packed codes and the on-disk dataset format.

Dataset file layout (all little-endian):

    offset  size  field
    0       4     magic "ABC1"
    4       4     format version, uint32 = 1
    8       4     p, code length in bits, uint32
    12      8     n, number of records, uint64
    20      ...   n records, each ceil(p/64) uint64 words

Within a record, bit i of the code is bit (i mod 64) of word (i div 64);
bits at positions >= p in the final word must be zero.
"""

from __future__ import annotations

import struct
from typing import Sequence

import numpy as np

from .core import MAX_CODE_LENGTH, BinaryCode

DATASET_MAGIC = b"ABC1"
DATASET_VERSION = 1
_HEADER = struct.Struct("<4sIIQ")


class FormatError(ValueError):
    """A file does not conform to the documented byte layout."""


def words_per_code(p: int) -> int:
    return (p + 63) // 64


class Dataset:
    """n packed codes of a common length p, backed by an (n, words) uint64 array.

    Lazily exposes the codes as plain integers and their popcounts, which is
    what the search engines consume.
    """

    def __init__(self, p: int, words: np.ndarray):
        if not 1 <= p <= MAX_CODE_LENGTH:
            raise ValueError(f"code length must be in [1, {MAX_CODE_LENGTH}], got {p}")
        words = np.ascontiguousarray(words, dtype=np.uint64)
        if words.ndim != 2 or words.shape[1] != words_per_code(p):
            raise ValueError("words array must have shape (n, ceil(p/64))")
        if p % 64 and len(words) and (words[:, -1] >> np.uint64(p % 64)).any():
            raise ValueError("trailing bits beyond position p must be zero")
        self.p = p
        self.words = words
        self._values: list[int] | None = None
        self._pops: list[int] | None = None

    def __len__(self) -> int:
        return len(self.words)

    @classmethod
    def from_codes(cls, codes: Sequence[BinaryCode]) -> "Dataset":
        if not codes:
            raise ValueError("cannot infer code length from an empty sequence")
        p = codes[0].p
        w = words_per_code(p)
        arr = np.zeros((len(codes), w), dtype=np.uint64)
        for i, c in enumerate(codes):
            if c.p != p:
                raise ValueError(f"mixed code lengths: {p} vs {c.p}")
            arr[i] = c.words
        return cls(p, arr)

    @property
    def values(self) -> list[int]:
        """Codes as plain integers, bit i of the code = bit i of the integer."""
        if self._values is None:
            w = self.words.shape[1]
            if w == 1:
                self._values = self.words[:, 0].tolist()
            else:
                raw = self.words.tobytes()
                rb = w * 8
                self._values = [
                    int.from_bytes(raw[i * rb : (i + 1) * rb], "little") for i in range(len(self))
                ]
        return self._values

    @property
    def pops(self) -> list[int]:
        if self._pops is None:
            self._pops = self.popcount_array().tolist()
        return self._pops

    def popcount_array(self) -> np.ndarray:
        return np.bitwise_count(self.words).sum(axis=1, dtype=np.int64)

    def code(self, i: int) -> BinaryCode:
        return BinaryCode(self.p, self.values[i])

    def codes(self) -> list[BinaryCode]:
        return [BinaryCode(self.p, v) for v in self.values]

    def prefix(self, n: int) -> "Dataset":
        if n > len(self):
            raise ValueError(f"prefix size {n} exceeds dataset size {len(self)}")
        return Dataset(self.p, self.words[:n])


def as_dataset(dataset, expect_p: int | None = None) -> tuple[list[int], list[int], int | None]:
    """Normalize a Dataset or a sequence of BinaryCode to (values, pops, p).

    p is None only for an empty plain sequence.  When expect_p is given, a
    known p must match it.
    """
    if isinstance(dataset, Dataset):
        p = dataset.p
        values, pops = dataset.values, dataset.pops
    else:
        codes = list(dataset)
        if not codes:
            return [], [], expect_p
        p = codes[0].p
        values = []
        pops = []
        for c in codes:
            if c.p != p:
                raise ValueError(f"mixed code lengths: {p} vs {c.p}")
            values.append(c.value)
            pops.append(c.value.bit_count())
    if expect_p is not None and p != expect_p:
        raise ValueError(f"code length mismatch: dataset p={p}, expected {expect_p}")
    return values, pops, p


def gen_dataset(n: int, p: int, density: float = 0.5, seed: int = 0) -> Dataset:
    """n random codes with i.i.d. bits set with probability ``density``.

    Deterministic for a fixed (n, p, density, seed).
    """
    if n < 0:
        raise ValueError("n must be nonnegative")
    if not 1 <= p <= MAX_CODE_LENGTH:
        raise ValueError(f"p must be in [1, {MAX_CODE_LENGTH}]")
    if not 0.0 < density < 1.0:
        raise ValueError("density must be in (0, 1)")
    rng = np.random.default_rng(seed)
    w = words_per_code(p)
    out = np.zeros((n, w), dtype=np.uint64)
    chunk = max(1, min(n, 1 << 16))
    row = 0
    while row < n:
        m = min(chunk, n - row)
        bits = rng.random((m, p)) < density
        packed = np.packbits(bits, axis=1, bitorder="little")
        padded = np.zeros((m, w * 8), dtype=np.uint8)
        padded[:, : packed.shape[1]] = packed
        out[row : row + m] = padded.view("<u8")
        row += m
    return Dataset(p, out)


def write_dataset(path, ds: Dataset) -> None:
    with open(path, "wb") as f:
        f.write(_HEADER.pack(DATASET_MAGIC, DATASET_VERSION, ds.p, len(ds)))
        f.write(ds.words.astype("<u8", copy=False).tobytes())


def read_dataset(path) -> Dataset:
    with open(path, "rb") as f:
        raw = f.read()
    return parse_dataset(raw)


def parse_dataset(raw: bytes) -> Dataset:
    if len(raw) < _HEADER.size:
        raise FormatError("file too short for a dataset header")
    magic, version, p, n = _HEADER.unpack_from(raw)
    if magic != DATASET_MAGIC:
        raise FormatError(f"bad magic {magic!r}, expected {DATASET_MAGIC!r}")
    if version != DATASET_VERSION:
        raise FormatError(f"unsupported dataset version {version}")
    if not 1 <= p <= MAX_CODE_LENGTH:
        raise FormatError(f"code length {p} out of range")
    w = words_per_code(p)
    body = raw[_HEADER.size :]
    if len(body) != n * w * 8:
        raise FormatError(f"body is {len(body)} bytes, expected {n * w * 8}")
    words = np.frombuffer(body, dtype="<u8").reshape(n, w).astype(np.uint64)
    try:
        return Dataset(p, words)
    except ValueError as e:
        raise FormatError(str(e)) from None
