"""Frequency lists and weighted sampling of synthetic person records."""

from __future__ import annotations

import csv
import os
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .encoder import IdentifierTag, Record, TAGS

LIST_FILES = {
    IdentifierTag.FORENAME: "forenames.csv",
    IdentifierTag.SURNAME: "surnames.csv",
    IdentifierTag.LOCATION: "locations.csv",
}


class FrequencyListError(ValueError):
    pass


@dataclass
class FrequencyList:
    tag: IdentifierTag
    entries: list[tuple[str, float]]

    def __post_init__(self):
        if not self.entries:
            raise FrequencyListError(f"empty {self.tag.name.lower()} list")
        seen = set()
        for value, weight in self.entries:
            if not weight > 0:
                raise FrequencyListError(f"non-positive weight for {value!r}")
            if value in seen:
                raise FrequencyListError(f"duplicate value {value!r}")
            seen.add(value)

    @property
    def values(self) -> list[str]:
        return [v for v, _ in self.entries]

    @property
    def weights(self) -> np.ndarray:
        return np.array([w for _, w in self.entries], dtype=float)

    @property
    def total_weight(self) -> float:
        return float(self.weights.sum())

    def probabilities(self) -> np.ndarray:
        w = self.weights
        return w / w.sum()


@dataclass
class Population:
    records: list[Record]
    provenance: dict = field(default_factory=dict)

    def __len__(self) -> int:
        return len(self.records)


def _parse_weight(text: str, where: str) -> float:
    try:
        w = float(text)
    except ValueError:
        raise FrequencyListError(f"{where}: weight {text!r} is not a number") from None
    if not w > 0:
        raise FrequencyListError(f"{where}: weight must be positive, got {text}")
    return w


def load_frequency_list(path, tag: IdentifierTag) -> FrequencyList:
    """Read ``value,weight`` lines.  Blank lines and ``#`` comments are skipped;
    a first line ``value,weight`` is accepted as a header."""
    entries = []
    with open(path, encoding="utf-8", newline="") as fh:
        for lineno, row in enumerate(csv.reader(fh), 1):
            if not row or not "".join(row).strip() or row[0].lstrip().startswith("#"):
                continue
            if lineno == 1 and [c.strip().lower() for c in row] == ["value", "weight"]:
                continue
            if len(row) != 2 or not row[0].strip():
                raise FrequencyListError(f"{path}:{lineno}: expected 'value,weight'")
            entries.append((row[0].strip(), _parse_weight(row[1].strip(), f"{path}:{lineno}")))
    if not entries:
        raise FrequencyListError(f"{path}: list is empty")
    try:
        return FrequencyList(tag, entries)
    except FrequencyListError as exc:
        raise FrequencyListError(f"{path}: {exc}") from None


def write_frequency_list(path, flist: FrequencyList) -> None:
    with open(path, "w", encoding="utf-8", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["value", "weight"])
        for value, weight in flist.entries:
            w.writerow([value, repr(weight) if not float(weight).is_integer() else int(weight)])


def load_lists(directory) -> dict[IdentifierTag, FrequencyList]:
    return {tag: load_frequency_list(os.path.join(directory, name), tag) for tag, name in LIST_FILES.items()}


def write_lists(directory, lists: dict[IdentifierTag, FrequencyList]) -> None:
    os.makedirs(directory, exist_ok=True)
    for tag, name in LIST_FILES.items():
        write_frequency_list(os.path.join(directory, name), lists[tag])


def _ids(start: int, count: int) -> list[str]:
    return [f"r{i:07d}" for i in range(start, start + count)]


def sample_population(lists: dict[IdentifierTag, FrequencyList], size: int, seed: int,
                      id_offset: int = 0) -> Population:
    """Draw ``size`` records, each attribute independently and proportional to weight."""
    if size < 1:
        raise ValueError("population size must be at least 1")
    rng = np.random.default_rng(seed)
    columns = []
    for tag in TAGS:
        fl = lists[tag]
        idx = rng.choice(len(fl.entries), size=size, p=fl.probabilities())
        values = fl.values
        columns.append([values[i] for i in idx])
    records = [Record(rid, f, s, l) for rid, f, s, l in zip(_ids(id_offset, size), *columns)]
    return Population(records, {"seed": seed, "size": size,
                                "lists": {t.name.lower(): len(lists[t].entries) for t in TAGS}})


def load_joint_list(path) -> list[tuple[tuple[str, str, str], float]]:
    """Correlated variant: ``forename,surname,location,weight`` per line."""
    out = []
    with open(path, encoding="utf-8", newline="") as fh:
        for lineno, row in enumerate(csv.reader(fh), 1):
            if not row or row[0].lstrip().startswith("#"):
                continue
            if lineno == 1 and row[-1].strip().lower() == "weight":
                continue
            if len(row) != 4:
                raise FrequencyListError(f"{path}:{lineno}: expected 'forename,surname,location,weight'")
            out.append(((row[0], row[1], row[2]), _parse_weight(row[3], f"{path}:{lineno}")))
    if not out:
        raise FrequencyListError(f"{path}: list is empty")
    return out


def sample_joint(joint: Sequence[tuple[tuple[str, str, str], float]], size: int, seed: int,
                 id_offset: int = 0) -> Population:
    if size < 1:
        raise ValueError("population size must be at least 1")
    rng = np.random.default_rng(seed)
    w = np.array([wt for _, wt in joint], dtype=float)
    idx = rng.choice(len(joint), size=size, p=w / w.sum())
    records = [Record(rid, *joint[i][0]) for rid, i in zip(_ids(id_offset, size), idx)]
    return Population(records, {"seed": seed, "size": size, "joint": len(joint)})


def split_roles(population: Population, target_size: int | None = None) -> tuple[Population, Population]:
    """Split an i.i.d. sample into target (to be encrypted) and training parts.

    Record ids are unique in the input, so the parts are disjoint.  By default
    the first half becomes the target.
    """
    n = len(population)
    if target_size is None:
        target_size = (n + 1) // 2
    if not 0 <= target_size <= n:
        raise ValueError("target size out of range")
    prov = dict(population.provenance)
    return (Population(population.records[:target_size], {**prov, "role": "target"}),
            Population(population.records[target_size:], {**prov, "role": "training"}))


# synthetic name lists from a sparse letter-level Markov chain

# rough German letter frequencies, per mille
_LETTER_FREQ = {
    "E": 174, "N": 98, "I": 76, "S": 73, "R": 70, "A": 65, "T": 62, "D": 51, "H": 48, "U": 44,
    "L": 34, "C": 31, "G": 30, "M": 25, "O": 25, "B": 19, "W": 19, "F": 17, "K": 12, "Z": 11,
    "P": 8, "V": 7, "J": 3, "Y": 1, "X": 1, "Q": 1,
}
_VOWEL_SET = set("AEIOUY")


class NameModel:
    """First-order chain over letters; each letter has a handful of successors.

    Few successors per letter keeps the bigram vocabulary small, so most
    bigrams are shared by many names as in real name lists.
    """

    def __init__(self, seed, fanout: int = 8, min_len: int = 3, max_len: int = 11):
        rng = np.random.default_rng(seed)
        self.letters = list(_LETTER_FREQ)
        freq = np.array([_LETTER_FREQ[c] for c in self.letters], dtype=float)
        self.min_len, self.max_len = min_len, max_len
        self.start = self._successors(rng, freq, None, min(fanout + 4, len(self.letters)))
        self.next = {c: self._successors(rng, freq, c, fanout) for c in self.letters}
        # chance to stop after a letter, higher after typical word endings
        self.stop = {c: (0.35 if c in "ENRSTA" else 0.12 if c in _VOWEL_SET else 0.05) for c in self.letters}

    def _successors(self, rng, freq, prev, fanout):
        w = freq.copy()
        if prev is not None:
            vowel = prev in _VOWEL_SET
            for i, c in enumerate(self.letters):
                w[i] *= 0.35 if (c in _VOWEL_SET) == vowel else 1.0
        choice = rng.choice(len(self.letters), size=fanout, replace=False, p=w / w.sum())
        probs = rng.dirichlet(np.full(fanout, 2.0)) * 0.5 + w[choice] / w[choice].sum() * 0.5
        return [self.letters[i] for i in choice], probs / probs.sum()

    def sample(self, rng) -> str:
        letters, p = self.start
        out = [letters[rng.choice(len(letters), p=p)]]
        while len(out) < self.max_len:
            if len(out) >= self.min_len and rng.random() < self.stop[out[-1]]:
                break
            letters, p = self.next[out[-1]]
            out.append(letters[rng.choice(len(letters), p=p)])
        return "".join(out).capitalize()


def synthetic_list(tag: IdentifierTag, size: int, seed: int, zipf_exponent: float = 1.0,
                   scale: float = 1e6) -> FrequencyList:
    """``size`` distinct generated names with Zipf weights ``scale / rank**s``."""
    model = NameModel([seed, int(tag), 0])
    rng = np.random.default_rng([seed, int(tag), 1])
    names: list[str] = []
    seen = set()
    attempts = 0
    while len(names) < size:
        attempts += 1
        if attempts > 200 * size:
            raise RuntimeError("name model cannot produce enough distinct names")
        name = model.sample(rng)
        if name.upper() in seen:
            continue
        seen.add(name.upper())
        names.append(name)
    ranks = np.arange(1, size + 1, dtype=float)
    weights = np.round(scale / ranks ** zipf_exponent, 3)
    return FrequencyList(tag, list(zip(names, weights.tolist())))


def synthetic_lists(n_forenames: int = 500, n_surnames: int = 1000, n_locations: int = 200,
                    seed: int = 0, zipf_exponent: float = 1.0) -> dict[IdentifierTag, FrequencyList]:
    sizes = {IdentifierTag.FORENAME: n_forenames, IdentifierTag.SURNAME: n_surnames,
             IdentifierTag.LOCATION: n_locations}
    return {tag: synthetic_list(tag, sizes[tag], seed, zipf_exponent) for tag in TAGS}
