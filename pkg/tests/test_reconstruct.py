"""Dice matching against reference lists and accuracy scoring."""

import numpy as np
import pytest
from hypothesis import given, strategies as st

from clkattack import reconstruct as rc
from clkattack.encoder import IdentifierTag, Record, TaggedBigram, extract_bigrams, preprocess, TAGS
from clkattack.popgen import FrequencyList

F, S, LOC = IdentifierTag.FORENAME, IdentifierTag.SURNAME, IdentifierTag.LOCATION


def bg(word, tag):
    return extract_bigrams(preprocess(word), tag)


def refs(tag, *pairs):
    return rc.reference_entries(FrequencyList(tag, list(pairs)))


bigram_sets = st.sets(st.sampled_from(sorted(bg("Maximilian", F) | bg("Annabella", F))), max_size=12)


@given(bigram_sets, bigram_sets, bigram_sets)
def test_dice_properties(a, b, c):
    assert rc.dice(a, b) == rc.dice(b, a)
    assert 0.0 <= rc.dice(a, b) <= 1.0
    assert rc.dice(a, a) == 1.0
    if a and b and not (a & b):
        assert rc.dice(a, b) == 0.0
    # 1 - dice is not a metric, but a subset never scores below its disjoint complement
    if a and a <= b:
        assert rc.dice(a, b) == 2 * len(a) / (len(a) + len(b))


def test_exact_match_and_empty():
    entries = refs(S, ("Müller", 10), ("Meier", 8))
    assert rc.match_reference(bg("Müller", S), entries) == ("MUELLER", 1.0)
    assert rc.match_reference(set(), entries) == (None, None)
    with pytest.raises(ValueError):
        rc.match_reference(bg("Müller", S), [])


def test_karlsruhe_location_bigrams():
    observed = {TaggedBigram(LOC, a, b) for a, b in
                ["HE", "E␣", "␣K", "RL", "AR", "LS", "RU", "KA", "UH", "SR"]}
    entries = refs(LOC, ("Karlsruhe", 300), ("Kassel", 200), ("Arnsberg", 70), ("Ruhla", 5))
    assert rc.match_reference(observed, entries) == ("KARLSRUHE", 1.0)
    # one bigram lost, one wrong one assigned
    noisy = (observed - {TaggedBigram(LOC, "U", "H")}) | {TaggedBigram(LOC, "E", "N")}
    value, score = rc.match_reference(noisy, entries)
    assert value == "KARLSRUHE"
    assert score == pytest.approx(2 * 9 / (10 + 10))


def test_tie_break_by_frequency_then_value():
    a = refs(F, ("Anna", 5), ("Anne", 9))
    observed = bg("Ann", F)  # equally close to both
    assert rc.match_reference(observed, a)[0] == "ANNE"
    b = refs(F, ("Anna", 5), ("Anne", 5))
    assert rc.match_reference(observed, b)[0] == "ANNA"


def test_score_floor():
    entries = refs(F, ("Peter", 1))
    observed = {TaggedBigram(F, "P", "E"), TaggedBigram(F, "X", "Y"), TaggedBigram(F, "Q", "Z")}
    assert rc.match_reference(observed, entries, score_floor=0.5) == (None, None)
    assert rc.match_reference(observed, entries, score_floor=0.0)[0] == "PETER"


def test_reference_entries_pool_canonical_duplicates():
    entries = refs(S, ("Müller", 3), ("Mueller", 2), ("Schmidt", 4))
    assert [(e.value, e.frequency) for e in entries] == [("MUELLER", 5.0), ("SCHMIDT", 4.0)]


def test_matcher_agrees_with_scalar_matching(rng):
    names = ["Anna", "Anne", "Annika", "Jan", "Jana", "Johann", "Jonas", "Maria", "Marie", "Mario"]
    entries = refs(F, *[(n, float(w)) for n, w in zip(names, rng.integers(1, 5, len(names)))])
    matcher = rc.ReferenceMatcher(entries)
    pool = sorted(set().union(*(e.bigram_set for e in entries)))
    queries = [set(rng.choice(len(pool), rng.integers(0, 8), replace=False).tolist()) for _ in range(300)]
    queries = [{pool[i] for i in q} for q in queries]
    for q, got in zip(queries, matcher.match_many(queries)):
        assert got == rc.match_reference(q, entries) or got[1] == pytest.approx(rc.match_reference(q, entries)[1])
        assert got[0] == rc.match_reference(q, entries)[0]


def test_assigned_bigrams_and_reconstruct():
    atom_map = {1: TaggedBigram(F, "␣", "E"), 2: TaggedBigram(F, "E", "V"), 3: TaggedBigram(F, "V", "A"),
                4: TaggedBigram(F, "A", "␣")}
    assert rc.assigned_bigrams([], atom_map) == set()
    assert rc.assigned_bigrams([1, 2, 99], atom_map) == {atom_map[1], atom_map[2]}
    lists = {F: refs(F, ("Eva", 1), ("Ida", 1)), S: refs(S, ("Roth", 1)), LOC: refs(LOC, ("Ulm", 1))}
    out = rc.reconstruct(["a", "b"], [[1, 2, 3, 4], []], atom_map, lists)
    assert out[0].values == {F: "EVA", S: None, LOC: None}
    assert out[0].scores[F] == 1.0
    assert out[1].values == {F: None, S: None, LOC: None}


def test_atom_bigram_map_drops_virtual():
    class Ranking:
        def bigram(self, i):
            return TaggedBigram.from_index(i)
    m = rc.atom_bigram_map([2, 0, 5, 1], Ranking(), n_atoms=3)
    assert m == {3: TaggedBigram.from_index(0), 1: TaggedBigram.from_index(1), 2: TaggedBigram.from_index(3)}


def _recon(fid, f, s, l):
    return rc.Reconstruction(fid, {F: f, S: s, LOC: l}, {F: 1.0, S: 1.0, LOC: 1.0})


def test_evaluate():
    truth = [Record("1", "Eva", "Müller", "Köln"), Record("2", "Jan", "Roth", "Ulm")]
    perfect = [_recon("1", "EVA", "MUELLER", "KOELN"), _recon("2", "JAN", "ROTH", "ULM")]
    rep = rc.evaluate(perfect, truth)
    assert rep.accuracy == {F: 1.0, S: 1.0, LOC: 1.0} and rep.full_record_accuracy == 1.0
    half = [_recon("1", "EVA", "MUELLER", "KOELN"), _recon("2", "JAN", "RUTH", "ULM")]
    rep = rc.evaluate(half, truth)
    assert rep.accuracy[S] == 0.5 and rep.accuracy[F] == 1.0 and rep.full_record_accuracy == 0.5
    none = [_recon("1", None, None, None), _recon("2", None, None, None)]
    rep = rc.evaluate(none, truth)
    assert rep.accuracy == {F: 0.0, S: 0.0, LOC: 0.0} and rep.full_record_accuracy == 0.0
    with pytest.raises(KeyError):
        rc.evaluate(perfect[:1], truth)


def test_files(tmp_path):
    recs = [rc.Reconstruction("1", {F: "EVA", S: None, LOC: "ULM"}, {F: 1.0, S: None, LOC: 0.75},
                              frozenset({TaggedBigram(F, "E", "V"), TaggedBigram(LOC, "U", "L")}))]
    rc.write_reconstructions(tmp_path / "r.csv", recs)
    assert rc.read_reconstructions(tmp_path / "r.csv") == recs
    rep = rc.evaluate(recs, [Record("1", "Eva", "", "Ulm")])
    rc.write_report(tmp_path / "rep.csv", rep)
    table = rc.read_report(tmp_path / "rep.csv")
    assert table["full_record_accuracy"] == "1.000000" and table["n_records"] == "1"
    rc.write_details(tmp_path / "d.csv", rep)
    assert (tmp_path / "d.csv").read_text().splitlines()[1] == "1,1,1,1"
