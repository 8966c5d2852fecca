"""Run configuration, file-based stages and the end-to-end driver."""

from __future__ import annotations

import configparser
import csv
import hashlib
import logging
import os
import time
from dataclasses import dataclass, field, fields
from typing import Callable

import numpy as np

from . import assign as asg
from . import atoms as atm
from . import popgen, reconstruct as rec
from .bitvec import read_filters, write_filters
from .encoder import (TRUTH_HEADER, Encoder, HashKeys, IdentifierTag, read_records, read_truth,
                      write_records, write_truth, TAGS)

log = logging.getLogger(__name__)

KEY_FIELDS = ("key_f", "key_g")


class StageError(RuntimeError):
    def __init__(self, stage: str, cause: BaseException):
        super().__init__(f"stage '{stage}' failed: {cause}")
        self.stage = stage
        self.cause = cause


class AttackInputError(PermissionError):
    """An attack stage was pointed at key material or ground truth."""


@dataclass
class RunConfig:
    L: int = 1000
    k: int = 20
    min_support: int = atm.DEFAULT_MIN_SUPPORT
    allowed_weights: tuple[int, ...] | None = None  # None: derived from L and k
    score_floor: float = rec.DEFAULT_SCORE_FLOOR
    seed: int = 0
    size: int = 20000
    training_size: int | None = None  # defaults to size
    dim: int = 2187
    threads: int = 1
    lists: str | None = None
    out: str = "run"

    def weights(self) -> list[int]:
        if self.allowed_weights is None:
            return atm.default_weights(self.L, self.k)
        return sorted(self.allowed_weights)


_RUN_TYPES = {f.name: f.type for f in fields(RunConfig)}
_RUN_NAMES = {name.lower(): name for name in _RUN_TYPES}  # configparser lowercases keys


def _coerce(name: str, raw: str):
    kind = _RUN_TYPES[name]
    raw = raw.strip()
    if "tuple" in kind:
        return None if raw.lower() in ("", "auto", "none") else tuple(parse_weights(raw))
    if "int" in kind and "None" in kind and raw.lower() in ("", "none"):
        return None
    if kind.startswith("int"):
        return int(raw)
    if kind.startswith("float"):
        return float(raw)
    return raw or None


def parse_weights(text: str) -> list[int]:
    return sorted({int(w) for w in text.replace(";", ",").split(",") if w.strip()})


def _read_ini(path) -> configparser.ConfigParser:
    with open(path, encoding="utf-8") as fh:
        body = fh.read()
    cp = configparser.ConfigParser()
    if not body.lstrip().startswith("["):
        body = "[run]\n" + body
    cp.read_string(body, source=str(path))
    return cp


def load_config(path, overrides: dict | None = None) -> RunConfig:
    """``key = value`` file (optional ``[run]`` header) plus overrides.

    Key material belongs to the ``[encode]`` section and never ends up in
    ``RunConfig``.
    """
    cfg = RunConfig()
    if path:
        cp = _read_ini(path)
        section = cp["run"] if cp.has_section("run") else {}
        for name, raw in section.items():
            if name in KEY_FIELDS:
                raise ValueError(f"{path}: '{name}' belongs in the [encode] section")
            if name not in _RUN_NAMES:
                raise ValueError(f"{path}: unknown setting '{name}'")
            setattr(cfg, _RUN_NAMES[name], _coerce(_RUN_NAMES[name], raw))
    for name, value in (overrides or {}).items():
        if value is not None:
            setattr(cfg, name, value)
    return cfg


def load_keys(path=None, environ=os.environ) -> HashKeys:
    """Keys from the ``[encode]`` section of a config file, else from the environment."""
    if path:
        cp = _read_ini(path)
        if cp.has_section("encode") and all(cp.has_option("encode", k) for k in KEY_FIELDS):
            return HashKeys.from_strings(cp.get("encode", "key_f"), cp.get("encode", "key_g"))
    return HashKeys.from_env(environ)


def seed_keys(seed: int) -> HashKeys:
    """Deterministic keys for simulation runs that were not given real ones."""
    h = hashlib.sha256(f"clkattack-simulation-keys:{seed}".encode()).hexdigest()
    return HashKeys.from_strings(h[:32], h[32:])


def check_attack_input(path) -> None:
    """Refuse ground-truth files and anything holding hash keys."""
    if path is None:
        return
    paths = [os.path.join(path, p) for p in sorted(os.listdir(path))] if os.path.isdir(path) else [path]
    for p in paths:
        if not os.path.isfile(p):
            continue
        with open(p, encoding="utf-8", errors="replace") as fh:
            head = fh.read(4096)
        first = head.splitlines()[0] if head else ""
        if first.strip() == ",".join(TRUTH_HEADER):
            raise AttackInputError(f"{p}: ground-truth files are not available to the attacker")
        for line in head.splitlines():
            name = line.split("=", 1)[0].strip().lower()
            if "=" in line and name in KEY_FIELDS:
                raise AttackInputError(f"{p}: key material is not available to the attacker")


# stages; each reads and writes files only

def stage_generate(lists_dir, size: int, seed: int, out_dir, training_size: int | None = None) -> dict:
    lists = popgen.load_lists(lists_dir)
    training_size = size if training_size is None else training_size
    pop = popgen.sample_population(lists, size + training_size, seed)
    target, training = popgen.split_roles(pop, size)
    os.makedirs(out_dir, exist_ok=True)
    paths = {"target": os.path.join(out_dir, "target_records.csv"),
             "training": os.path.join(out_dir, "training_records.csv")}
    write_records(paths["target"], target.records)
    write_records(paths["training"], training.records)
    return paths


def stage_encode(records_path, keys: HashKeys, L: int, k: int, filters_path, truth_path) -> None:
    records = read_records(records_path)
    corpus = Encoder(keys, L, k).encode_corpus(records)
    write_filters(filters_path, corpus)
    write_truth(truth_path, records)


def stage_detect(filters_path, k: int, weights, min_support: int, atoms_path, threads: int = 1) -> list[atm.Atom]:
    check_attack_input(filters_path)
    corpus = read_filters(filters_path)
    found = atm.detect_atoms(corpus, k, weights, min_support, threads)
    atm.write_atoms(atoms_path, found)
    return found


def stage_assign(atoms_path, filters_path, training_path, sigma_path, progress_path,
                 freq_path=None, dim: int = 2187,
                 on_update: Callable[[int, float], None] | None = None) -> asg.Assignment:
    for p in (atoms_path, filters_path, training_path):
        check_attack_input(p)
    found = atm.read_atoms(atoms_path)
    corpus = read_filters(filters_path)
    training = read_records(training_path)
    ranking, e = asg.build_E(training, dim)
    member = atm.membership_matrix(corpus, found[:dim])
    d = asg.build_D(member, len(ranking))
    result = asg.optimize(d, e, on_update=on_update)
    asg.write_sigma(sigma_path, result, ranking, min(len(found), dim))
    asg.write_progress(progress_path, result.progress)
    if freq_path:
        asg.write_frequencies(freq_path, ranking)
    return result


def reference_lists(refs_dir) -> dict[IdentifierTag, list[rec.ReferenceEntry]]:
    lists = popgen.load_lists(refs_dir)
    return {t: rec.reference_entries(lists[t]) for t in TAGS}


def stage_reconstruct(sigma_path, atoms_path, filters_path, refs_dir, recon_path,
                      score_floor: float = rec.DEFAULT_SCORE_FLOOR) -> list[rec.Reconstruction]:
    for p in (sigma_path, atoms_path, filters_path, refs_dir):
        check_attack_input(p)
    atom_map = asg.read_sigma(sigma_path)
    found = atm.read_atoms(atoms_path)
    corpus = read_filters(filters_path)
    known = [a for a in found if a.rank in atom_map]
    member = atm.membership_matrix(corpus, known)
    ranks = np.array([a.rank for a in known], dtype=np.int64)
    per_filter = [ranks[np.flatnonzero(row)].tolist() for row in member]
    out = rec.reconstruct(corpus.ids, per_filter, atom_map, reference_lists(refs_dir), score_floor)
    rec.write_reconstructions(recon_path, out)
    return out


def stage_evaluate(recon_path, truth_path, report_path, details_path=None) -> rec.AttackReport:
    report = rec.evaluate(rec.read_reconstructions(recon_path), read_truth(truth_path))
    rec.write_report(report_path, report)
    if details_path:
        rec.write_details(details_path, report)
    return report


@dataclass
class PipelineResult:
    report: rec.AttackReport
    paths: dict[str, str]
    timings: dict[str, float] = field(default_factory=dict)
    n_atoms: int = 0
    assignment: asg.Assignment | None = None


def run_pipeline(cfg: RunConfig, keys: HashKeys | None = None, lists_dir=None) -> PipelineResult:
    """generate -> encode -> detect-atoms -> assign -> reconstruct -> evaluate -> report.

    ``cfg.lists`` names the frequency-list directory; without one, synthetic
    lists are written into the run directory first.  Timings go to
    ``timings.csv`` so every other output is a pure function of the config.
    """
    from .report import write_report_bundle

    out = cfg.out
    os.makedirs(out, exist_ok=True)
    marker = os.path.join(out, "INCOMPLETE")
    p = {name: os.path.join(out, fname) for name, fname in [
        ("filters", "filters.txt"), ("truth", "truth.csv"), ("atoms", "atoms.csv"),
        ("sigma", "sigma.csv"), ("progress", "progress.csv"), ("freq", "bigram_freq.csv"),
        ("recon", "recon.csv"), ("report", "report.csv"), ("details", "report_detail.csv"),
        ("timings", "timings.csv"), ("figures", "figures")]}
    lists_dir = lists_dir or cfg.lists
    if keys is None:
        keys = seed_keys(cfg.seed)
    timings: dict[str, float] = {}
    state: dict = {}

    def stage(name, fn):
        with open(marker, "w", encoding="utf-8") as fh:
            fh.write(f"running stage: {name}\n")
        t0 = time.perf_counter()
        try:
            result = fn()
        except Exception as exc:
            with open(marker, "w", encoding="utf-8") as fh:
                fh.write(f"failed stage: {name}: {exc}\n")
            raise StageError(name, exc) from exc
        timings[name] = time.perf_counter() - t0
        log.info("stage %-12s %.2fs", name, timings[name])
        return result

    if lists_dir is None:
        lists_dir = os.path.join(out, "lists")
        stage("lists", lambda: popgen.write_lists(lists_dir, popgen.synthetic_lists(seed=cfg.seed)))
    p["lists"] = lists_dir
    p.update(stage("generate", lambda: stage_generate(lists_dir, cfg.size, cfg.seed, out, cfg.training_size)))
    stage("encode", lambda: stage_encode(p["target"], keys, cfg.L, cfg.k, p["filters"], p["truth"]))
    found = stage("detect-atoms", lambda: stage_detect(p["filters"], cfg.k, cfg.weights(), cfg.min_support,
                                                       p["atoms"], cfg.threads))
    state["assignment"] = stage("assign", lambda: stage_assign(p["atoms"], p["filters"], p["training"], p["sigma"],
                                                               p["progress"], p["freq"], cfg.dim))
    stage("reconstruct", lambda: stage_reconstruct(p["sigma"], p["atoms"], p["filters"], lists_dir, p["recon"],
                                                   cfg.score_floor))
    report = stage("evaluate", lambda: stage_evaluate(p["recon"], p["truth"], p["report"], p["details"]))
    stage("report", lambda: write_report_bundle(p["progress"], p["freq"], p["figures"], p["report"]))
    with open(p["timings"], "w", encoding="utf-8", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["stage", "seconds"])
        for name, sec in timings.items():
            w.writerow([name, f"{sec:.3f}"])
    os.remove(marker)
    return PipelineResult(report, p, timings, len(found), state["assignment"])
