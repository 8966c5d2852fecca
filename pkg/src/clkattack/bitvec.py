"""Fixed-length bit vectors stored in 64-bit words.

Bit ``j`` lives in word ``j // 64`` at bit ``j % 64`` (least significant
first).  Padding bits past ``L`` are always zero, so word-level popcounts and
comparisons need no masking.
"""

from __future__ import annotations

from typing import Iterable, Iterator, Sequence

import numpy as np

WORD = 64
_U64 = np.dtype("<u8")


class IncompatibleFiltersError(ValueError):
    """Raised when two filters of different lengths are combined."""


def n_words(length: int) -> int:
    return (length + WORD - 1) // WORD


def pack_bits(bits: np.ndarray) -> np.ndarray:
    """Pack a boolean array along its last axis into little-endian uint64 words."""
    bits = np.asarray(bits, dtype=bool)
    length = bits.shape[-1]
    pad = n_words(length) * WORD - length
    if pad:
        widths = [(0, 0)] * (bits.ndim - 1) + [(0, pad)]
        bits = np.pad(bits, widths)
    packed = np.packbits(bits, axis=-1, bitorder="little")
    return np.ascontiguousarray(packed).view(_U64)


def unpack_bits(words: np.ndarray, length: int) -> np.ndarray:
    words = np.ascontiguousarray(words, dtype=_U64)
    as_bytes = words.view(np.uint8)
    return np.unpackbits(as_bytes, axis=-1, count=length, bitorder="little").astype(bool)


class BloomFilter:
    """Immutable bit array of length ``L``."""

    __slots__ = ("_words", "_length")

    def __init__(self, words: np.ndarray, length: int):
        if length < 1:
            raise ValueError("filter length must be positive")
        words = np.array(words, dtype=_U64, copy=True).reshape(-1)
        if words.size != n_words(length):
            raise ValueError(f"expected {n_words(length)} words for L={length}, got {words.size}")
        tail = length % WORD
        if tail and int(words[-1]) >> tail:
            raise ValueError("bits set beyond filter length")
        words.flags.writeable = False
        self._words = words
        self._length = length

    # construction

    @classmethod
    def zeros(cls, length: int) -> BloomFilter:
        return cls(np.zeros(n_words(length), dtype=_U64), length)

    @classmethod
    def from_positions(cls, positions: Iterable[int], length: int) -> BloomFilter:
        bits = np.zeros(length, dtype=bool)
        idx = np.fromiter(positions, dtype=np.int64)
        if idx.size and (idx.min() < 0 or idx.max() >= length):
            raise IndexError(f"position out of range for L={length}")
        bits[idx] = True
        return cls(pack_bits(bits), length)

    @classmethod
    def from_bits(cls, bits: Sequence[bool] | np.ndarray) -> BloomFilter:
        bits = np.asarray(bits, dtype=bool)
        return cls(pack_bits(bits), bits.size)

    @classmethod
    def from_string(cls, text: str) -> BloomFilter:
        text = text.strip()
        if not text or set(text) - {"0", "1"}:
            raise ValueError("filter string must be a non-empty run of '0'/'1'")
        bits = np.frombuffer(text.encode("ascii"), dtype=np.uint8) == ord("1")
        return cls.from_bits(bits)

    # accessors

    @property
    def words(self) -> np.ndarray:
        return self._words

    def __len__(self) -> int:
        return self._length

    def __getitem__(self, j: int) -> int:
        if not 0 <= j < self._length:
            raise IndexError(j)
        return (int(self._words[j // WORD]) >> (j % WORD)) & 1

    def bits(self) -> np.ndarray:
        return unpack_bits(self._words, self._length)

    def positions(self) -> tuple[int, ...]:
        return tuple(int(j) for j in np.flatnonzero(self.bits()))

    def to_string(self) -> str:
        return (self.bits().astype(np.uint8) + ord("0")).tobytes().decode("ascii")

    def popcount(self) -> int:
        return int(np.bitwise_count(self._words).sum())

    def __or__(self, other: BloomFilter) -> BloomFilter:
        return bitwise_or(self, other)

    def __and__(self, other: BloomFilter) -> BloomFilter:
        return bitwise_and(self, other)

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, BloomFilter):
            return NotImplemented
        return self._length == other._length and np.array_equal(self._words, other._words)

    def __hash__(self) -> int:
        return hash((self._length, self._words.tobytes()))

    def __repr__(self) -> str:
        return f"BloomFilter(L={self._length}, popcount={self.popcount()})"


def _check(a: BloomFilter, b: BloomFilter) -> None:
    if len(a) != len(b):
        raise IncompatibleFiltersError(f"cannot combine filters of length {len(a)} and {len(b)}")


def bitwise_or(a: BloomFilter, b: BloomFilter) -> BloomFilter:
    _check(a, b)
    return BloomFilter(a.words | b.words, len(a))


def bitwise_and(a: BloomFilter, b: BloomFilter) -> BloomFilter:
    _check(a, b)
    return BloomFilter(a.words & b.words, len(a))


def popcount(a: BloomFilter) -> int:
    return a.popcount()


def indicator(positions: Iterable[int], length: int) -> BloomFilter:
    return BloomFilter.from_positions(positions, length)


def contains_all(a: BloomFilter, positions: Iterable[int]) -> bool:
    """True iff every listed position is set in ``a`` (vacuously true for no positions)."""
    for j in positions:
        if not 0 <= j < len(a):
            raise IndexError(f"position {j} out of range for L={len(a)}")
        if not a[j]:
            return False
    return True


def or_all(filters: Iterable[BloomFilter], length: int) -> BloomFilter:
    acc = np.zeros(n_words(length), dtype=_U64)
    for f in filters:
        if len(f) != length:
            raise IncompatibleFiltersError(f"filter of length {len(f)} in corpus of length {length}")
        acc |= f.words
    return BloomFilter(acc, length)


class FilterCorpus:
    """A list of equal-length filters with record ids, stored as one word matrix.

    ``rows`` has shape ``(N, ceil(L/64))``.  ``columns()`` gives the transposed
    view: one packed bitset over filters per bit position, which is what the
    atom scan works on.
    """

    def __init__(self, ids: Sequence[str], rows: np.ndarray, length: int):
        rows = np.ascontiguousarray(rows, dtype=_U64)
        if rows.ndim != 2 or rows.shape[1] != n_words(length):
            raise ValueError("row matrix has the wrong shape")
        if len(ids) != rows.shape[0]:
            raise ValueError("one id per filter required")
        rows.flags.writeable = False
        self.ids = list(ids)
        self.rows = rows
        self.length = length
        self._columns: np.ndarray | None = None

    @classmethod
    def from_filters(cls, filters: Sequence[BloomFilter], ids: Sequence[str] | None = None,
                     length: int | None = None) -> FilterCorpus:
        if length is None:
            if not filters:
                raise ValueError("cannot infer L from an empty corpus")
            length = len(filters[0])
        for f in filters:
            if len(f) != length:
                raise IncompatibleFiltersError("all filters in a corpus must share L")
        if ids is None:
            ids = [str(i) for i in range(len(filters))]
        rows = np.stack([f.words for f in filters]) if filters else np.zeros((0, n_words(length)), _U64)
        return cls(ids, rows, length)

    @classmethod
    def from_bits(cls, bits: np.ndarray, ids: Sequence[str] | None = None) -> FilterCorpus:
        bits = np.asarray(bits, dtype=bool)
        if ids is None:
            ids = [str(i) for i in range(bits.shape[0])]
        return cls(ids, pack_bits(bits), bits.shape[1])

    def __len__(self) -> int:
        return self.rows.shape[0]

    def __getitem__(self, i: int) -> BloomFilter:
        return BloomFilter(self.rows[i], self.length)

    def __iter__(self) -> Iterator[BloomFilter]:
        for i in range(len(self)):
            yield self[i]

    def bits(self) -> np.ndarray:
        return unpack_bits(self.rows, self.length)

    def columns(self) -> np.ndarray:
        """Packed column bitsets, shape ``(L, ceil(N/64))``; cached."""
        if self._columns is None:
            cols = pack_bits(self.bits().T)
            cols.flags.writeable = False
            self._columns = cols
        return self._columns

    def subset(self, index: Sequence[int] | np.ndarray) -> FilterCorpus:
        index = np.asarray(index, dtype=np.int64)
        return FilterCorpus([self.ids[i] for i in index], self.rows[index], self.length)


def write_filters(path, corpus: FilterCorpus, with_ids: bool = True) -> None:
    """One filter per line: ``id,0101...`` (or just the bit string)."""
    bits = corpus.bits().astype(np.uint8) + ord("0")
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        for rid, row in zip(corpus.ids, bits):
            line = row.tobytes().decode("ascii")
            fh.write(f"{rid},{line}\n" if with_ids else line + "\n")


def read_filters(path) -> FilterCorpus:
    ids: list[str] = []
    rows: list[np.ndarray] = []
    length = None
    with open(path, encoding="utf-8") as fh:
        for lineno, raw in enumerate(fh, 1):
            line = raw.strip()
            if not line:
                continue
            rid, sep, body = line.rpartition(",")
            if not sep:
                rid = str(len(ids))
            if not body or set(body) - {"0", "1"}:
                raise ValueError(f"{path}:{lineno}: not a filter line")
            if length is None:
                length = len(body)
            elif len(body) != length:
                raise IncompatibleFiltersError(f"{path}:{lineno}: length {len(body)} != {length}")
            ids.append(rid)
            rows.append(np.frombuffer(body.encode("ascii"), dtype=np.uint8) == ord("1"))
    if length is None:
        raise ValueError(f"{path}: no filters")
    return FilterCorpus.from_bits(np.array(rows), ids)
