"""Co-occurrence matrices and the swap hill-climber assigning atoms to bigrams.

Indices are 0-based in code; files use 1-based ranks.  ``sigma[i]`` is the
atom index assigned to bigram rank ``i``; atom indices ``>= n`` are virtual
(all-zero rows in ``D``).
"""

from __future__ import annotations

import csv
import logging
from dataclasses import dataclass, field
from typing import Callable, Iterable, Sequence

import numpy as np
from scipy import sparse
from scipy.spatial.distance import cdist

from .encoder import N_BIGRAMS, Record, TaggedBigram, record_bigrams

log = logging.getLogger(__name__)

# |delta| at or below this counts as no change
TOLERANCE = 1e-10


@dataclass
class BigramRanking:
    order: np.ndarray   # canonical bigram index of rank i
    counts: np.ndarray  # records containing that bigram

    def __len__(self) -> int:
        return len(self.order)

    def bigram(self, rank: int) -> TaggedBigram:
        return TaggedBigram.from_index(int(self.order[rank]))

    def top(self, m: int) -> list[tuple[TaggedBigram, int]]:
        return [(self.bigram(i), int(self.counts[i])) for i in range(min(m, len(self)))]


@dataclass
class Assignment:
    sigma: np.ndarray
    objective_value: float
    update_count: int
    progress: list[float] = field(default_factory=list)

    @property
    def initial_objective(self) -> float:
        return self.progress[0] if self.progress else self.objective_value


def incidence(records: Sequence[Record]) -> sparse.csr_matrix:
    """Records x 2187 presence matrix over canonical bigram indices."""
    indptr, indices = [0], []
    for r in records:
        idx = sorted(b.index for b in record_bigrams(r))
        indices.extend(idx)
        indptr.append(len(indices))
    data = np.ones(len(indices), dtype=np.int64)
    return sparse.csr_matrix((data, np.array(indices, dtype=np.int64), np.array(indptr)),
                             shape=(len(records), N_BIGRAMS))


def _relative_cooccurrence(inc: sparse.spmatrix, total: int) -> np.ndarray:
    co = (inc.T @ inc).toarray().astype(float)
    np.fill_diagonal(co, 0.0)
    return co / total if total else co


def build_E(training: Sequence[Record], dim: int = N_BIGRAMS) -> tuple[BigramRanking, np.ndarray]:
    """Rank bigrams by record presence and return ``e_ij = t_ij / T`` in rank order.

    Ties in presence count keep canonical order (tag, then alphabet).
    ``dim < 2187`` keeps only the ``dim`` most frequent bigrams.
    """
    if not training:
        raise ValueError("training corpus is empty")
    inc = incidence(training)
    counts = np.asarray(inc.sum(axis=0)).ravel()
    order = np.lexsort((np.arange(N_BIGRAMS), -counts))[:dim]
    e = _relative_cooccurrence(inc[:, order], len(training))
    return BigramRanking(order, counts[order]), e


def build_D(membership: np.ndarray, dim: int = N_BIGRAMS) -> np.ndarray:
    """``d_ij = b_ij / N`` from a filters x atoms membership matrix (atoms in rank order).

    ``N`` counts filters holding at least one atom; rows and columns past the
    number of atoms stay zero up to ``dim``.
    """
    membership = np.asarray(membership, dtype=bool)
    n = membership.shape[1]
    if n > dim:
        raise ValueError(f"{n} atoms do not fit a {dim}-dimensional assignment")
    used = membership[membership.any(axis=1)]
    d = np.zeros((dim, dim))
    if used.shape[0]:
        m = sparse.csr_matrix(used.astype(np.int64))
        d[:n, :n] = _relative_cooccurrence(m, used.shape[0])
    return d


def objective(sigma: Sequence[int], d: np.ndarray, e: np.ndarray) -> float:
    """``sum_ij |d[sigma_i, sigma_j] - e_ij|``."""
    sigma = np.asarray(sigma)
    if d.shape != e.shape or len(sigma) != e.shape[0]:
        raise ValueError("dimension mismatch")
    return float(np.abs(d[np.ix_(sigma, sigma)] - e).sum())


def swap_delta(sigma: Sequence[int], d: np.ndarray, e: np.ndarray, a: int, b: int) -> float:
    """Objective change from exchanging ``sigma[a]`` and ``sigma[b]``; O(dim).

    Only rows and columns ``a``, ``b`` change; both matrices are symmetric with
    zero diagonal, so the column change mirrors the row change and the
    ``(a, b)`` entry is unaffected.
    """
    if a == b:
        raise ValueError("swap needs two distinct positions")
    sigma = np.asarray(sigma)
    row_a = d[sigma[a], sigma]
    row_b = d[sigma[b], sigma]
    mask = np.ones(len(sigma), dtype=bool)
    mask[[a, b]] = False
    ea, eb = e[a, mask], e[b, mask]
    ra, rb = row_a[mask], row_b[mask]
    new = np.abs(rb - ea).sum() + np.abs(ra - eb).sum()
    old = np.abs(ra - ea).sum() + np.abs(rb - eb).sum()
    return float(2.0 * (new - old))


def _schedule_keys(dim: int) -> np.ndarray:
    """Position of proposal ``(a, b)``, ``a < b``, in the distance schedule:
    distance ``b - a`` first, then ``a``.  Lower-triangle entries get +inf."""
    a = np.arange(dim)[:, None]
    b = np.arange(dim)[None, :]
    keys = ((b - a) * dim + a).astype(float)
    keys[b <= a] = np.inf
    return keys


class _Climber:
    """Keeps ``M = D[sigma][:, sigma]`` and the cross-cost matrix
    ``X[p, q] = sum_j |M[q, j] - E[p, j]|`` so all transposition deltas come
    out of one O(dim^2) expression."""

    def __init__(self, d: np.ndarray, e: np.ndarray, sigma: np.ndarray):
        self.e = e
        self.d = d
        self.sigma = sigma.copy()
        self.m = d[np.ix_(self.sigma, self.sigma)]
        self.x = cdist(e, self.m, metric="cityblock")
        self.const = -2.0 * (self.m + e) + 2.0 * np.abs(self.m - e)
        self.keys = _schedule_keys(len(sigma))
        self._buf = np.empty_like(self.x)

    def all_deltas(self) -> np.ndarray:
        """Half of every transposition delta (the factor 2 is left out)."""
        buf = self._buf
        np.add(self.x, self.x.T, out=buf)
        r = np.diag(self.x)
        buf -= r[:, None]
        buf -= r[None, :]
        buf += self.const
        return buf

    def swap(self, a: int, b: int) -> None:
        s = self.sigma
        s[a], s[b] = s[b], s[a]
        m = self.m
        m[[a, b]] = m[[b, a]]
        m[:, [a, b]] = m[:, [b, a]]
        x = self.x
        x[:, [a, b]] = x[:, [b, a]]
        u, v = m[:, b], m[:, a]  # old M[pi(q), a], old M[pi(q), b]
        ea, eb = self.e[:, a], self.e[:, b]
        # the correction vanishes where u == v or where E[:, a] == E[:, b]
        cols = np.flatnonzero(u != v)
        rows = np.flatnonzero(ea != eb)
        if cols.size and rows.size:
            uc, vc = u[cols][None, :], v[cols][None, :]
            er, fr = ea[rows][:, None], eb[rows][:, None]
            x[np.ix_(rows, cols)] += (np.abs(vc - er) - np.abs(uc - er)) - (np.abs(vc - fr) - np.abs(uc - fr))
        for i in (a, b):
            row = -2.0 * (m[i] + self.e[i]) + 2.0 * np.abs(m[i] - self.e[i])
            self.const[i] = row
            self.const[:, i] = row

    def resync(self) -> None:
        self.x = cdist(self.e, self.m, metric="cityblock")


def optimize(d: np.ndarray, e: np.ndarray, sigma0: Sequence[int] | None = None,
             tol: float = TOLERANCE, max_updates: int | None = None,
             on_update: Callable[[int, float], None] | None = None,
             resync_every: int = 1000) -> Assignment:
    """Hill-climb over transpositions in distance order, restarting after every
    improvement; stop when a whole schedule pass finds nothing below ``-tol``.

    Every delta is screened in bulk, then the first candidate in schedule order
    is confirmed with :func:`swap_delta` before it is accepted.
    """
    d = np.asarray(d, dtype=float)
    e = np.asarray(e, dtype=float)
    if d.shape != e.shape or d.shape[0] != d.shape[1]:
        raise ValueError("D and E must be square matrices of the same size")
    dim = d.shape[0]
    sigma = np.arange(dim) if sigma0 is None else np.array(sigma0, dtype=np.int64)
    value = objective(sigma, d, e)
    progress = [value]
    if on_update:
        on_update(0, value)
    if dim < 2:
        return Assignment(sigma, value, 0, progress)
    climb = _Climber(d, e, sigma)
    updates = 0
    while max_updates is None or updates < max_updates:
        half = climb.all_deltas()
        cand = np.flatnonzero(half < -tol / 4)
        keys = climb.keys.flat[cand]
        accepted = False
        while cand.size:
            j = int(np.argmin(keys))
            if not np.isfinite(keys[j]):
                break
            keys[j] = np.inf
            a, b = divmod(int(cand[j]), dim)
            delta = swap_delta(climb.sigma, d, e, a, b)
            if delta < -tol:
                climb.swap(a, b)
                value += delta
                updates += 1
                progress.append(value)
                if on_update:
                    on_update(updates, value)
                if resync_every and updates % resync_every == 0:
                    climb.resync()
                accepted = True
                break
        if not accepted:
            break
    # the running sum drifts by ~1e-12 over thousands of updates; report the exact value
    value = objective(climb.sigma, d, e)
    log.info("optimizer: %d updates, objective %.6f -> %.6f", updates, progress[0], value)
    return Assignment(climb.sigma.copy(), value, updates, progress)


def optimize_reference(d: np.ndarray, e: np.ndarray, sigma0: Sequence[int] | None = None,
                       tol: float = TOLERANCE) -> Assignment:
    """Plain loop over the same schedule with one :func:`swap_delta` per proposal.

    Slow; kept as the cross-check for :func:`optimize` on small instances.
    """
    dim = d.shape[0]
    sigma = np.arange(dim) if sigma0 is None else np.array(sigma0, dtype=np.int64)
    value = objective(sigma, d, e)
    progress = [value]
    improved = True
    while improved:
        improved = False
        for dist in range(1, dim):
            for a in range(dim - dist):
                delta = swap_delta(sigma, d, e, a, a + dist)
                if delta < -tol:
                    sigma[a], sigma[a + dist] = sigma[a + dist], sigma[a]
                    value += delta
                    progress.append(value)
                    improved = True
                    break
            if improved:
                break
    return Assignment(sigma, value, len(progress) - 1, progress)


# files

SIGMA_HEADER = ["bigram_rank", "bigram", "atom_rank"]
PROGRESS_HEADER = ["update_index", "objective"]
FREQ_HEADER = ["rank", "bigram", "records"]


def write_sigma(path, assignment: Assignment, ranking: BigramRanking, n_atoms: int) -> None:
    with open(path, "w", encoding="utf-8", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(SIGMA_HEADER)
        for i, atom in enumerate(assignment.sigma):
            w.writerow([i + 1, str(ranking.bigram(i)), int(atom) + 1 if atom < n_atoms else "NONE"])


def read_sigma(path) -> dict[int, TaggedBigram]:
    """Atom rank (1-based) -> assigned bigram."""
    out = {}
    with open(path, encoding="utf-8", newline="") as fh:
        rows = csv.reader(fh)
        if next(rows, None) != SIGMA_HEADER:
            raise ValueError(f"{path}: not a sigma file")
        for row in rows:
            if row and row[2] != "NONE":
                out[int(row[2])] = TaggedBigram.parse(row[1])
    return out


def write_progress(path, progress: Iterable[float]) -> None:
    with open(path, "w", encoding="utf-8", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(PROGRESS_HEADER)
        for i, v in enumerate(progress):
            w.writerow([i, repr(float(v))])


def read_progress(path) -> list[tuple[int, float]]:
    with open(path, encoding="utf-8", newline="") as fh:
        rows = csv.reader(fh)
        if next(rows, None) != PROGRESS_HEADER:
            raise ValueError(f"{path}: not a progress file")
        return [(int(r[0]), float(r[1])) for r in rows if r]


def write_frequencies(path, ranking: BigramRanking) -> None:
    with open(path, "w", encoding="utf-8", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(FREQ_HEADER)
        for i in range(len(ranking)):
            w.writerow([i + 1, str(ranking.bigram(i)), int(ranking.counts[i])])


def read_frequencies(path) -> list[tuple[TaggedBigram, int]]:
    with open(path, encoding="utf-8", newline="") as fh:
        rows = csv.reader(fh)
        if next(rows, None) != FREQ_HEADER:
            raise ValueError(f"{path}: not a bigram frequency file")
        return [(TaggedBigram.parse(r[1]), int(r[2])) for r in rows if r]
