"""Frequency lists, weighted sampling and the target/training split."""

import numpy as np
import pytest

from clkattack import popgen
from clkattack.encoder import IdentifierTag, Record, TAGS, record_bigrams, N_BIGRAMS
from clkattack.popgen import FrequencyList, FrequencyListError

F, S, LOC = IdentifierTag.FORENAME, IdentifierTag.SURNAME, IdentifierTag.LOCATION


def _single(f, s, l):
    return {F: FrequencyList(F, [(f, 1.0)]), S: FrequencyList(S, [(s, 1.0)]), LOC: FrequencyList(LOC, [(l, 1.0)])}


def test_load_two_entries(tmp_path):
    p = tmp_path / "s.csv"
    p.write_text("MUELLER,263\nSCHMIDT,250\n")
    fl = popgen.load_frequency_list(p, S)
    assert fl.entries == [("MUELLER", 263.0), ("SCHMIDT", 250.0)]


@pytest.mark.parametrize("body", ["A,0\n", "A,-3\n", "A,x\n", "A\n", "", "# only a comment\n", "A,1\nA,2\n"])
def test_load_rejects(tmp_path, body):
    p = tmp_path / "bad.csv"
    p.write_text(body)
    with pytest.raises(FrequencyListError):
        popgen.load_frequency_list(p, F)


def test_header_and_comments(tmp_path):
    p = tmp_path / "f.csv"
    p.write_text("value,weight\n# top names\n\nAnna,3\nJan,1.5\n")
    assert popgen.load_frequency_list(p, F).entries == [("Anna", 3.0), ("Jan", 1.5)]


def test_zipf_list_total_weight(tmp_path):
    fl = popgen.synthetic_list(F, 500, seed=4)
    assert len(fl.entries) == 500
    assert fl.total_weight == pytest.approx(sum(w for _, w in fl.entries))
    w = fl.weights
    assert (np.diff(w) <= 0).all()  # rank order
    popgen.write_frequency_list(tmp_path / "f.csv", fl)
    back = popgen.load_frequency_list(tmp_path / "f.csv", F)
    assert back.values == fl.values
    np.testing.assert_allclose(back.weights, fl.weights, rtol=1e-12)


def test_synthetic_lists_sizes_and_determinism():
    a = popgen.synthetic_lists(50, 80, 20, seed=9)
    b = popgen.synthetic_lists(50, 80, 20, seed=9)
    assert {t: len(a[t].entries) for t in TAGS} == {F: 50, S: 80, LOC: 20}
    assert all(a[t].entries == b[t].entries for t in TAGS)
    assert a[S].entries != popgen.synthetic_lists(50, 80, 20, seed=10)[S].entries


def test_size_one_single_entry():
    pop = popgen.sample_population(_single("Eva", "Klein", "Bonn"), 1, seed=0)
    assert pop.records == [Record("r0000000", "Eva", "Klein", "Bonn")]
    with pytest.raises(ValueError):
        popgen.sample_population(_single("a", "b", "c"), 0, seed=0)


def test_same_seed_same_population():
    lists = popgen.synthetic_lists(30, 30, 10, seed=1)
    assert popgen.sample_population(lists, 200, 5).records == popgen.sample_population(lists, 200, 5).records
    assert popgen.sample_population(lists, 200, 5).records != popgen.sample_population(lists, 200, 6).records


def test_marginals_within_multinomial_bounds():
    n = 100_000
    lists = {F: FrequencyList(F, [("A", 5), ("B", 3), ("C", 2)]),
             S: FrequencyList(S, [("X", 1), ("Y", 1)]),
             LOC: FrequencyList(LOC, [("P", 9), ("Q", 1)])}
    pop = popgen.sample_population(lists, n, seed=11)
    for tag in TAGS:
        fl = lists[tag]
        counts = {v: 0 for v in fl.values}
        for r in pop.records:
            counts[r.value(tag)] += 1
        for v, p in zip(fl.values, fl.probabilities()):
            sd = np.sqrt(n * p * (1 - p))
            assert abs(counts[v] - n * p) <= 3 * sd, (tag, v)


def test_split_disjoint_halves():
    lists = popgen.synthetic_lists(20, 20, 5, seed=2)
    pop = popgen.sample_population(lists, 40, seed=3)
    target, training = popgen.split_roles(pop)
    assert len(target) == len(training) == 20
    assert not {r.id for r in target.records} & {r.id for r in training.records}
    t1, t2 = popgen.split_roles(popgen.sample_population(lists, 2, seed=3))
    assert len(t1) == len(t2) == 1
    t, tr = popgen.split_roles(pop, 10)
    assert (len(t), len(tr)) == (10, 30)
    with pytest.raises(ValueError):
        popgen.split_roles(pop, 41)


def _freq_vector(records):
    v = np.zeros(N_BIGRAMS)
    for r in records:
        for b in record_bigrams(r):
            v[b.index] += 1
    return v


def test_split_bigram_profiles_agree():
    lists = popgen.synthetic_lists(seed=5)
    pop = popgen.sample_population(lists, 100_000, seed=6)
    target, training = popgen.split_roles(pop)
    a, b = _freq_vector(target.records), _freq_vector(training.records)
    cos = a @ b / (np.linalg.norm(a) * np.linalg.norm(b))
    assert cos > 0.95


def test_joint_list(tmp_path):
    p = tmp_path / "joint.csv"
    p.write_text("forename,surname,location,weight\nEva,Klein,Bonn,3\nJan,Wolf,Ulm,1\n")
    joint = popgen.load_joint_list(p)
    assert len(joint) == 2
    pop = popgen.sample_joint(joint, 50, seed=0)
    assert {(r.forename, r.surname, r.location) for r in pop.records} <= {("Eva", "Klein", "Bonn"), ("Jan", "Wolf", "Ulm")}


def test_lists_directory_round_trip(tmp_path):
    lists = popgen.synthetic_lists(10, 12, 4, seed=0)
    popgen.write_lists(tmp_path, lists)
    back = popgen.load_lists(tmp_path)
    assert all(back[t].values == lists[t].values for t in TAGS)
