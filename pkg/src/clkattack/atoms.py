"""Attacker-side atom detection.

With double hashing every atom is an arithmetic progression ``f0 + i*g0 mod L``.
The scan walks all progressions, intersects the per-position column bitsets of
the corpus to find the filters containing each candidate, and keeps a
candidate when the AND of exactly those filters is the candidate itself.
"""

from __future__ import annotations

import csv
import logging
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from typing import Iterable, Iterator, Sequence

import numpy as np

from .bitvec import FilterCorpus, n_words, pack_bits, unpack_bits

log = logging.getLogger(__name__)

DEFAULT_MIN_SUPPORT = 20
WEIGHT_PROBABILITY_CUTOFF = 0.01


@dataclass(frozen=True)
class Atom:
    positions: tuple[int, ...]
    support: int
    rank: int = 0

    @property
    def weight(self) -> int:
        return len(self.positions)


@dataclass(frozen=True)
class Family:
    """All progressions with one step: ``starts`` x ``weight`` positions."""
    step: int
    starts: np.ndarray
    weight: int

    def position_matrix(self, length: int) -> np.ndarray:
        return (self.starts[:, None] + self.step * np.arange(self.weight)[None, :]) % length


def cycle_length(g0: int, length: int) -> int:
    return length // math.gcd(g0, length)


def atom_weight(g0: int, length: int, k: int) -> int:
    """Distinct positions of a progression with step ``g0``: ``min(k, L/gcd(g0, L))``."""
    return min(k, cycle_length(g0, length))


def _divisors(n: int) -> list[int]:
    small = [d for d in range(1, math.isqrt(n) + 1) if n % d == 0]
    return sorted(set(small + [n // d for d in small]))


def weight_family(length: int, k: int) -> list[int]:
    """Every weight an atom can have for these parameters (``{1,2,4,5,8,10,20}`` at L=1000, k=20)."""
    return sorted({min(k, d) for d in _divisors(length)})


def _totient(n: int) -> int:
    result, m, p = n, n, 2
    while p * p <= m:
        if m % p == 0:
            while m % p == 0:
                m //= p
            result -= result // p
        p += 1
    if m > 1:
        result -= result // m
    return result


def weight_probability(length: int, k: int, threshold: int) -> float:
    """Share of steps ``g0`` (uniform on ``[0, L)``) whose atom weight is below ``threshold``.

    Exactly ``phi(c)`` steps have cycle length ``c`` for each divisor ``c`` of ``L``.
    """
    count = sum(_totient(c) for c in _divisors(length) if min(k, c) < threshold)
    return count / length


def default_weights(length: int, k: int, cutoff: float = WEIGHT_PROBABILITY_CUTOFF) -> list[int]:
    """Weights kept by default: the family from the largest member ``t`` whose
    lighter weights together occur with probability at most ``cutoff``.

    At L=1000, k=20 this gives ``[8, 10, 20]`` (lighter weights: 0.008).
    """
    family = weight_family(length, k)
    t = max(w for w in family if weight_probability(length, k, w) <= cutoff)
    return [w for w in family if w >= t]


def candidate_families(length: int, k: int, allowed_weights: Iterable[int] | None = None) -> list[Family]:
    """Progressions grouped by step, with trivially equal sets removed.

    Steps whose cycle closes within ``k`` terms produce subgroup cosets, listed
    once per coset.  Longer cycles produce ``k``-term progressions; step ``g0``
    and ``L - g0`` give the same sets reversed, so only ``g0 <= L/2`` is kept.
    """
    if length < 2:
        raise ValueError("need L >= 2")
    allowed = set(weight_family(length, k) if allowed_weights is None else allowed_weights)
    families = []
    for d in _divisors(length):
        if d <= k and d in allowed:
            families.append(Family(length // d % length, np.arange(length // d), d))
    if k in allowed:
        starts = np.arange(length)
        for g0 in range(1, length // 2 + 1):
            if cycle_length(g0, length) > k:
                families.append(Family(g0, starts, k))
    return families


def candidate_sets(length: int, k: int, allowed_weights: Iterable[int] | None = None) -> list[tuple[int, ...]]:
    """Distinct canonical position sets of all progressions with allowed weight."""
    seen: set[tuple[int, ...]] = set()
    for fam in candidate_families(length, k, allowed_weights):
        rows = np.sort(fam.position_matrix(length), axis=1)
        seen.update(map(tuple, rows.tolist()))
    return sorted(seen, key=lambda p: (len(p), p))


def _row_support(acc: np.ndarray) -> np.ndarray:
    return np.bitwise_count(acc).sum(axis=1, dtype=np.int64)


def _scan_family(fam: Family, columns: np.ndarray, rows: np.ndarray, length: int,
                 min_support: int) -> list[Atom]:
    starts = fam.starts
    acc = columns[starts].copy()
    for i in range(1, fam.weight):
        acc &= columns[(starts + i * fam.step) % length]
        if i >= 2:
            keep = _row_support(acc) >= min_support
            if not keep.all():
                starts, acc = starts[keep], acc[keep]
                if starts.size == 0:
                    return []
    support = _row_support(acc)
    found = []
    n_filters = rows.shape[0]
    for f0, members_words, sup in zip(starts, acc, support):
        if sup < min_support:
            continue
        pos = tuple(sorted({(int(f0) + i * fam.step) % length for i in range(fam.weight)}))
        members = np.flatnonzero(unpack_bits(members_words, n_filters))
        joint = np.bitwise_and.reduce(rows[members], axis=0)
        if np.array_equal(joint, _indicator_words(pos, length)):
            found.append(Atom(pos, int(sup)))
    return found


def _indicator_words(pos: Sequence[int], length: int) -> np.ndarray:
    bits = np.zeros(length, dtype=bool)
    bits[list(pos)] = True
    return pack_bits(bits)


def rank_atoms(atoms: Iterable[Atom]) -> list[Atom]:
    """Deduplicate, sort by decreasing support (ties: position order), number from 1."""
    unique = {a.positions: a for a in atoms}
    ordered = sorted(unique.values(), key=lambda a: (-a.support, a.positions))
    return [Atom(a.positions, a.support, r) for r, a in enumerate(ordered, 1)]


def detect_atoms(corpus: FilterCorpus, k: int, allowed_weights: Iterable[int] | None = None,
                 min_support: int = DEFAULT_MIN_SUPPORT, threads: int = 1) -> list[Atom]:
    """Ranked atoms of the corpus; no key material involved."""
    length = corpus.length
    if allowed_weights is None:
        allowed_weights = default_weights(length, k)
    if len(corpus) == 0:
        raise ValueError("empty corpus")
    min_support = max(1, min_support)
    columns = corpus.columns()
    families = candidate_families(length, k, allowed_weights)

    def scan(fam: Family) -> list[Atom]:
        return _scan_family(fam, columns, corpus.rows, length, min_support)

    if threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            parts = list(pool.map(scan, families))
    else:
        parts = [scan(f) for f in families]
    atoms = rank_atoms(a for part in parts for a in part)
    log.info("detected %d atoms from %d candidate families over %d filters",
             len(atoms), len(families), len(corpus))
    return atoms


def containing_filters(corpus: FilterCorpus, positions: Sequence[int]) -> np.ndarray:
    """Indices of filters with every listed position set."""
    columns = corpus.columns()
    acc = np.full(columns.shape[1], np.iinfo(np.uint64).max, dtype=np.uint64)
    for j in positions:
        acc &= columns[j]
    return np.flatnonzero(unpack_bits(acc, len(corpus)))


def and_coincides(corpus: FilterCorpus, atom: Atom) -> bool:
    """Re-run the AND over the atom's supporting filters and compare with the atom."""
    members = containing_filters(corpus, atom.positions)
    if members.size != atom.support or members.size == 0:
        return False
    joint = np.bitwise_and.reduce(corpus.rows[members], axis=0)
    return bool(np.array_equal(joint, _indicator_words(atom.positions, corpus.length)))


def membership_matrix(corpus: FilterCorpus, atoms: Sequence[Atom]) -> np.ndarray:
    """Boolean ``(N, n)``: filter ``i`` contains atom of rank ``j+1``."""
    columns = corpus.columns()
    out = np.zeros((len(corpus), len(atoms)), dtype=bool)
    for j, atom in enumerate(atoms):
        acc = columns[atom.positions[0]].copy()
        for p in atom.positions[1:]:
            acc &= columns[p]
        out[:, j] = unpack_bits(acc, len(corpus))
    return out


@dataclass
class AtomIndex:
    per_filter: list[frozenset[int]]
    per_atom: dict[int, np.ndarray]
    matrix: np.ndarray

    def __iter__(self) -> Iterator[frozenset[int]]:
        return iter(self.per_filter)


def atom_membership_index(corpus: FilterCorpus, atoms: Sequence[Atom]) -> AtomIndex:
    """Per filter, the ranks of contained atoms; per atom rank, the filter indices."""
    m = membership_matrix(corpus, atoms)
    ranks = np.array([a.rank for a in atoms], dtype=np.int64)
    per_filter = [frozenset(ranks[np.flatnonzero(row)].tolist()) for row in m]
    per_atom = {int(r): np.flatnonzero(m[:, j]) for j, r in enumerate(ranks)}
    return AtomIndex(per_filter, per_atom, m)


# atoms.csv

ATOM_HEADER = ["rank", "weight", "support", "positions"]


def write_atoms(path, atoms: Sequence[Atom]) -> None:
    with open(path, "w", encoding="utf-8", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(ATOM_HEADER)
        for a in atoms:
            w.writerow([a.rank, a.weight, a.support, ";".join(map(str, a.positions))])


def read_atoms(path) -> list[Atom]:
    with open(path, encoding="utf-8", newline="") as fh:
        rows = csv.reader(fh)
        if next(rows, None) != ATOM_HEADER:
            raise ValueError(f"{path}: not an atoms file")
        atoms = []
        for lineno, row in enumerate(rows, 2):
            if not row:
                continue
            rank, weight, support, pos = row
            positions = tuple(int(p) for p in pos.split(";")) if pos else ()
            if len(positions) != int(weight):
                raise ValueError(f"{path}:{lineno}: weight does not match positions")
            atoms.append(Atom(positions, int(support), int(rank)))
    return atoms
