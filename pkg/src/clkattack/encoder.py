"""Defender side: standardize identifiers, split them into tagged bigrams and
hash those into record-level Bloom filters with the double-hashing scheme."""

from __future__ import annotations

import csv
import enum
import hashlib
import hmac
import os
import unicodedata
from dataclasses import dataclass, field
from typing import Iterable, NamedTuple, Sequence

import numpy as np

from .bitvec import BloomFilter, FilterCorpus, contains_all, pack_bits

BLANK = "␣"  # visible padding blank
ALPHABET = BLANK + "ABCDEFGHIJKLMNOPQRSTUVWXYZ"
MAX_TOKENS = 10
N_PAIRS = len(ALPHABET) ** 2  # 729

_TRANSLIT = {"Ä": "AE", "Ö": "OE", "Ü": "UE", "ä": "AE", "ö": "OE", "ü": "UE", "ß": "SS", "ẞ": "SS"}
_LETTER_INDEX = {c: i for i, c in enumerate(ALPHABET)}


class IdentifierTag(enum.IntEnum):
    FORENAME = 0
    SURNAME = 1
    LOCATION = 2

    @property
    def code(self) -> str:
        return "fsl"[self.value]

    @classmethod
    def from_code(cls, code: str) -> IdentifierTag:
        try:
            return cls("fsl".index(code))
        except ValueError:
            return cls[code.upper()]


TAGS = tuple(IdentifierTag)
N_BIGRAMS = len(TAGS) * N_PAIRS  # 2187


class TaggedBigram(NamedTuple):
    tag: IdentifierTag
    first: str
    second: str

    @property
    def pair(self) -> str:
        return self.first + self.second

    @property
    def index(self) -> int:
        """Canonical index in [0, 2187): tag-major, then alphabet order."""
        return (self.tag * len(ALPHABET) + _LETTER_INDEX[self.first]) * len(ALPHABET) + _LETTER_INDEX[self.second]

    @classmethod
    def from_index(cls, index: int) -> TaggedBigram:
        if not 0 <= index < N_BIGRAMS:
            raise ValueError(f"bigram index {index} out of range")
        tag, rest = divmod(index, N_PAIRS)
        a, b = divmod(rest, len(ALPHABET))
        return cls(IdentifierTag(tag), ALPHABET[a], ALPHABET[b])

    @classmethod
    def parse(cls, text: str) -> TaggedBigram:
        """Inverse of ``str()``: ``"ER_s"``, ``"␣P_f"``."""
        pair, _, code = text.rpartition("_")
        if len(pair) != 2 or any(c not in _LETTER_INDEX for c in pair):
            raise ValueError(f"not a tagged bigram: {text!r}")
        return cls(IdentifierTag.from_code(code), pair[0], pair[1])

    def __str__(self) -> str:
        return f"{self.pair}_{self.tag.code}"


def all_bigrams() -> list[TaggedBigram]:
    return [TaggedBigram.from_index(i) for i in range(N_BIGRAMS)]


@dataclass(frozen=True)
class HashKeys:
    key_f: bytes = field(repr=False)
    key_g: bytes = field(repr=False)

    def __post_init__(self):
        if not self.key_f or not self.key_g:
            raise ValueError("hash keys must be non-empty")

    @classmethod
    def from_strings(cls, key_f: str, key_g: str) -> HashKeys:
        return cls(key_f.encode("utf-8"), key_g.encode("utf-8"))

    @classmethod
    def from_env(cls, environ=os.environ) -> HashKeys:
        try:
            return cls.from_strings(environ["CLK_KEY_F"], environ["CLK_KEY_G"])
        except KeyError as exc:
            raise KeyError(f"missing environment variable {exc.args[0]}") from None


@dataclass
class Record:
    id: str
    forename: str = ""
    surname: str = ""
    location: str = ""

    def value(self, tag: IdentifierTag) -> str:
        return (self.forename, self.surname, self.location)[tag]


def preprocess(raw: str) -> str:
    """Canonical padded form: ``"Müller"`` -> ``"␣MUELLER␣"``.

    German umlauts and ß are transliterated first so they survive truncation;
    other accents are decomposed and dropped, everything outside A-Z
    (including inner blanks and hyphens) is removed, the result is cut to ten
    letters and padded with one blank per side.  Empty results stay empty.
    """
    text = "".join(_TRANSLIT.get(c, c) for c in raw)
    text = unicodedata.normalize("NFKD", text).upper()
    letters = "".join(c for c in text if "A" <= c <= "Z")[:MAX_TOKENS]
    return f"{BLANK}{letters}{BLANK}" if letters else ""


def canonical_value(raw: str) -> str:
    """Preprocessed value without padding; what reconstruction is scored against."""
    return preprocess(raw).strip(BLANK)


def extract_bigrams(padded: str, tag: IdentifierTag) -> set[TaggedBigram]:
    return {TaggedBigram(tag, padded[i], padded[i + 1]) for i in range(len(padded) - 1)}


def record_bigrams(record: Record) -> set[TaggedBigram]:
    out: set[TaggedBigram] = set()
    for tag in TAGS:
        out |= extract_bigrams(preprocess(record.value(tag)), tag)
    return out


def _prf(key: bytes, bigram: TaggedBigram) -> int:
    msg = f"{bigram.tag.name}|{bigram.pair}".encode("utf-8")
    return int.from_bytes(hmac.new(key, msg, hashlib.sha256).digest(), "big")


def base_hashes(bigram: TaggedBigram, keys: HashKeys, length: int) -> tuple[int, int]:
    """The two keyed base hashes ``(f, g)`` reduced mod ``L``."""
    return _prf(keys.key_f, bigram) % length, _prf(keys.key_g, bigram) % length


def progression(f_val: int, g_val: int, length: int, k: int) -> tuple[int, ...]:
    """Distinct values of ``(f + i*g) mod L`` for ``i < k``, sorted."""
    return tuple(sorted({(f_val + i * g_val) % length for i in range(k)}))


def positions(bigram: TaggedBigram, keys: HashKeys, length: int, k: int) -> tuple[int, ...]:
    if length < 2 or k < 1:
        raise ValueError("need L >= 2 and k >= 1")
    f_val, g_val = base_hashes(bigram, keys, length)
    return progression(f_val, g_val, length, k)


class Encoder:
    """Holds the secret keys and caches the 2187 atom position sets."""

    def __init__(self, keys: HashKeys, length: int = 1000, k: int = 20):
        if length < 2 or k < 1:
            raise ValueError("need L >= 2 and k >= 1")
        self.keys = keys
        self.length = length
        self.k = k
        self._table: list[tuple[int, ...] | None] = [None] * N_BIGRAMS

    def positions(self, bigram: TaggedBigram) -> tuple[int, ...]:
        i = bigram.index
        if self._table[i] is None:
            self._table[i] = positions(bigram, self.keys, self.length, self.k)
        return self._table[i]

    def atom(self, bigram: TaggedBigram) -> BloomFilter:
        return BloomFilter.from_positions(self.positions(bigram), self.length)

    def _record_bits(self, record: Record, out: np.ndarray) -> None:
        for b in record_bigrams(record):
            out[list(self.positions(b))] = True

    def encode_record(self, record: Record) -> BloomFilter:
        bits = np.zeros(self.length, dtype=bool)
        self._record_bits(record, bits)
        return BloomFilter(pack_bits(bits), self.length)

    def encode_corpus(self, records: Sequence[Record]) -> FilterCorpus:
        bits = np.zeros((len(records), self.length), dtype=bool)
        for i, r in enumerate(records):
            self._record_bits(r, bits[i])
        return FilterCorpus.from_bits(bits, [r.id for r in records])

    def query(self, bf: BloomFilter, bigram: TaggedBigram) -> bool:
        return contains_all(bf, self.positions(bigram))


def encode_record(record: Record, keys: HashKeys, length: int = 1000, k: int = 20) -> BloomFilter:
    return Encoder(keys, length, k).encode_record(record)


def query(bf: BloomFilter, bigram: TaggedBigram, keys: HashKeys, length: int = 1000, k: int = 20) -> bool:
    """Membership test; ``True`` may be a false positive, ``False`` never is wrong."""
    return contains_all(bf, positions(bigram, keys, length, k))


# corpus files

RECORD_HEADER = ["id", "forename", "surname", "location"]
TRUTH_HEADER = ["id", "true_forename", "true_surname", "true_location"]


def write_records(path, records: Iterable[Record], header: Sequence[str] = RECORD_HEADER) -> None:
    with open(path, "w", encoding="utf-8", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        for r in records:
            w.writerow([r.id, r.forename, r.surname, r.location])


def read_records(path, header: Sequence[str] = RECORD_HEADER) -> list[Record]:
    with open(path, encoding="utf-8", newline="") as fh:
        rows = csv.reader(fh)
        head = next(rows, None)
        if head != list(header):
            raise ValueError(f"{path}: expected header {','.join(header)}, got {head}")
        out = []
        for lineno, row in enumerate(rows, 2):
            if not row:
                continue
            if len(row) != 4:
                raise ValueError(f"{path}:{lineno}: expected 4 columns, got {len(row)}")
            out.append(Record(*row))
    return out


def write_truth(path, records: Iterable[Record]) -> None:
    write_records(path, records, TRUTH_HEADER)


def read_truth(path) -> list[Record]:
    return read_records(path, TRUTH_HEADER)
