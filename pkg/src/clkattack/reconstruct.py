"""Turn assigned bigram sets back into attribute values and score them."""

from __future__ import annotations

import csv
from dataclasses import dataclass, field
from typing import Iterable, Mapping, Sequence

import numpy as np
from scipy import sparse

from .encoder import (N_PAIRS, TAGS, IdentifierTag, Record, TaggedBigram, canonical_value,
                      extract_bigrams, preprocess)
from .popgen import FrequencyList

DEFAULT_SCORE_FLOOR = 0.5


@dataclass(frozen=True)
class ReferenceEntry:
    value: str          # canonical, unpadded
    tag: IdentifierTag
    bigram_set: frozenset
    frequency: float


@dataclass
class Reconstruction:
    filter_id: str
    values: dict[IdentifierTag, str | None]
    scores: dict[IdentifierTag, float | None]
    assigned: frozenset = field(default_factory=frozenset)


@dataclass
class AttackReport:
    accuracy: dict[IdentifierTag, float]
    full_record_accuracy: float
    n_records: int
    details: list[tuple[str, dict[IdentifierTag, bool]]] = field(default_factory=list)


def dice(a: Iterable, b: Iterable) -> float:
    a, b = set(a), set(b)
    if not a and not b:
        return 1.0
    return 2 * len(a & b) / (len(a) + len(b))


def reference_entries(flist: FrequencyList) -> list[ReferenceEntry]:
    """Canonicalize a frequency list; values that collapse together pool their weight.

    The result is sorted by decreasing frequency, then value, which is the
    tie-break order of :func:`match_reference`.
    """
    pooled: dict[str, float] = {}
    for value, weight in flist.entries:
        canon = canonical_value(value)
        if canon:
            pooled[canon] = pooled.get(canon, 0.0) + weight
    entries = [ReferenceEntry(v, flist.tag, frozenset(extract_bigrams(preprocess(v), flist.tag)), w)
               for v, w in pooled.items()]
    return sorted(entries, key=lambda r: (-r.frequency, r.value))


def match_reference(bigrams: Iterable[TaggedBigram], refs: Sequence[ReferenceEntry],
                    score_floor: float = DEFAULT_SCORE_FLOOR) -> tuple[str | None, float | None]:
    """Best reference by Dice score; ties go to the more frequent, then smaller value."""
    query = set(bigrams)
    if not refs:
        raise ValueError("no reference entries")
    if not query:
        return None, None
    best, best_key = None, None
    for r in refs:
        s = dice(query, r.bigram_set)
        key = (-s, -r.frequency, r.value)
        if best_key is None or key < best_key:
            best, best_key = r, key
    score = -best_key[0]
    if score < score_floor:
        return None, None
    return best.value, score


def atom_bigram_map(sigma: Sequence[int], ranking, n_atoms: int) -> dict[int, TaggedBigram]:
    """Atom rank (1-based) -> bigram from the assignment rule; virtual atoms dropped."""
    return {int(a) + 1: ranking.bigram(i) for i, a in enumerate(sigma) if a < n_atoms}


def assigned_bigrams(filter_atoms: Iterable[int], atom_map: Mapping[int, TaggedBigram]) -> set[TaggedBigram]:
    return {atom_map[a] for a in filter_atoms if a in atom_map}


class ReferenceMatcher:
    """Batch Dice matching of many per-tag bigram sets against one reference list."""

    def __init__(self, refs: Sequence[ReferenceEntry], score_floor: float = DEFAULT_SCORE_FLOOR):
        if not refs:
            raise ValueError("no reference entries")
        self.refs = sorted(refs, key=lambda r: (-r.frequency, r.value))
        self.score_floor = score_floor
        self.matrix = _pair_matrix([r.bigram_set for r in self.refs])
        self.sizes = np.array([len(r.bigram_set) for r in self.refs], dtype=float)

    def match_many(self, queries: Sequence[set]) -> list[tuple[str | None, float | None]]:
        q = _pair_matrix(queries)
        qsizes = np.asarray(q.sum(axis=1)).ravel().astype(float)
        inter = (q @ self.matrix.T).toarray().astype(float)
        with np.errstate(invalid="ignore", divide="ignore"):
            scores = 2.0 * inter / (qsizes[:, None] + self.sizes[None, :])
        out = []
        for i, row in enumerate(scores):
            if qsizes[i] == 0:
                out.append((None, None))
                continue
            j = int(np.argmax(row))  # refs are pre-sorted, so the first max wins ties
            s = float(row[j])
            out.append((self.refs[j].value, s) if s >= self.score_floor else (None, None))
        return out


def _pair_matrix(sets: Sequence[Iterable[TaggedBigram]]) -> sparse.csr_matrix:
    indptr, indices = [0], []
    for s in sets:
        indices.extend(sorted({b.index % N_PAIRS for b in s}))
        indptr.append(len(indices))
    data = np.ones(len(indices), dtype=np.int64)
    return sparse.csr_matrix((data, np.array(indices, dtype=np.int64), np.array(indptr)),
                             shape=(len(sets), N_PAIRS))


def reconstruct(filter_ids: Sequence[str], filter_atoms: Sequence[Iterable[int]],
                atom_map: Mapping[int, TaggedBigram], refs: Mapping[IdentifierTag, Sequence[ReferenceEntry]],
                score_floor: float = DEFAULT_SCORE_FLOOR) -> list[Reconstruction]:
    assigned = [frozenset(assigned_bigrams(atoms, atom_map)) for atoms in filter_atoms]
    per_tag = {}
    for tag in TAGS:
        matcher = ReferenceMatcher(refs[tag], score_floor)
        per_tag[tag] = matcher.match_many([{b for b in bs if b.tag == tag} for bs in assigned])
    out = []
    for i, fid in enumerate(filter_ids):
        out.append(Reconstruction(fid, {t: per_tag[t][i][0] for t in TAGS},
                                  {t: per_tag[t][i][1] for t in TAGS}, assigned[i]))
    return out


def evaluate(reconstructions: Sequence[Reconstruction], truth: Sequence[Record]) -> AttackReport:
    """Compare against the canonical form of the true values.

    An empty true value counts as recovered when nothing was reported.
    """
    by_id = {r.id: r for r in truth}
    if len(by_id) != len(reconstructions) or any(r.filter_id not in by_id for r in reconstructions):
        missing = sorted(set(by_id) ^ {r.filter_id for r in reconstructions})[:5]
        raise KeyError(f"reconstruction and ground-truth ids do not align (e.g. {missing})")
    hits = {t: 0 for t in TAGS}
    full = 0
    details = []
    for rec in reconstructions:
        true = by_id[rec.filter_id]
        ok = {t: (rec.values[t] or "") == canonical_value(true.value(t)) for t in TAGS}
        for t in TAGS:
            hits[t] += ok[t]
        full += all(ok.values())
        details.append((rec.filter_id, ok))
    n = len(reconstructions)
    acc = {t: hits[t] / n if n else 0.0 for t in TAGS}
    return AttackReport(acc, full / n if n else 0.0, n, details)


# files

RECON_HEADER = ["id", "forename", "forename_score", "surname", "surname_score",
                "location", "location_score", "bigrams"]
REPORT_HEADER = ["metric", "value"]


def write_reconstructions(path, recs: Sequence[Reconstruction]) -> None:
    with open(path, "w", encoding="utf-8", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(RECON_HEADER)
        for r in recs:
            row = [r.filter_id]
            for t in TAGS:
                v, s = r.values[t], r.scores[t]
                row += ["NONE", ""] if v is None else [v, f"{s:.6f}"]
            row.append(";".join(sorted((str(b) for b in r.assigned), key=lambda x: TaggedBigram.parse(x).index)))
            w.writerow(row)


def read_reconstructions(path) -> list[Reconstruction]:
    out = []
    with open(path, encoding="utf-8", newline="") as fh:
        rows = csv.reader(fh)
        if next(rows, None) != RECON_HEADER:
            raise ValueError(f"{path}: not a reconstruction file")
        for row in rows:
            if not row:
                continue
            values, scores = {}, {}
            for k, t in enumerate(TAGS):
                v, s = row[1 + 2 * k], row[2 + 2 * k]
                values[t] = None if v == "NONE" else v
                scores[t] = None if v == "NONE" else float(s)
            assigned = frozenset(TaggedBigram.parse(b) for b in row[7].split(";") if b)
            out.append(Reconstruction(row[0], values, scores, assigned))
    return out


def write_report(path, report: AttackReport, extra: Mapping[str, object] | None = None) -> None:
    with open(path, "w", encoding="utf-8", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(REPORT_HEADER)
        w.writerow(["n_records", report.n_records])
        for t in TAGS:
            w.writerow([f"{t.name.lower()}_accuracy", f"{report.accuracy[t]:.6f}"])
        w.writerow(["full_record_accuracy", f"{report.full_record_accuracy:.6f}"])
        for k, v in (extra or {}).items():
            w.writerow([k, v])


def read_report(path) -> dict[str, str]:
    with open(path, encoding="utf-8", newline="") as fh:
        rows = csv.reader(fh)
        if next(rows, None) != REPORT_HEADER:
            raise ValueError(f"{path}: not a report file")
        return {r[0]: r[1] for r in rows if r}


def write_details(path, report: AttackReport) -> None:
    with open(path, "w", encoding="utf-8", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["id"] + [f"{t.name.lower()}_correct" for t in TAGS])
        for fid, ok in report.details:
            w.writerow([fid] + [int(ok[t]) for t in TAGS])
