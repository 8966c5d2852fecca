"""Co-occurrence matrices and the transposition hill climber."""

import itertools

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from clkattack import assign as asg
from clkattack.encoder import IdentifierTag, N_BIGRAMS, Record, TaggedBigram, record_bigrams

PERMS8 = np.array(list(itertools.permutations(range(8))))


def cooccurrence_instance(rng, n, records=200):
    """E from a random record x bigram incidence with distinct presence rates."""
    p = rng.uniform(0.05, 0.9, n)
    inc = rng.random((records, n)) < p
    e = inc.T.astype(float) @ inc / records
    np.fill_diagonal(e, 0.0)
    return e


def planted(e, perm):
    d = np.empty_like(e)
    d[np.ix_(perm, perm)] = e
    return d


def brute_objective(sigma, d, e):
    n = len(sigma)
    return sum(abs(d[sigma[i], sigma[j]] - e[i, j]) for i in range(n) for j in range(n))


# E and D

def test_build_E_pair_in_every_record():
    recs = [Record("1", "Eva", "", ""), Record("2", "Eva", "", "")]
    ranking, e = asg.build_E(recs)
    assert sorted(ranking.order) == list(range(N_BIGRAMS))  # complete ranking
    top = {ranking.bigram(i) for i in range(4)}
    assert {str(b) for b in top} == {"␣E_f", "EV_f", "VA_f", "A␣_f"}
    assert e[0, 1] == 1.0 and e[0, 0] == 0.0
    assert (e[:4, 4:] == 0).all()


def test_build_E_ties_canonical_and_dim():
    recs = [Record("1", "Ab", "", ""), Record("2", "Ab", "Cd", "")]
    ranking, e = asg.build_E(recs, dim=10)
    assert e.shape == (10, 10) and len(ranking) == 10
    names = [str(ranking.bigram(i)) for i in range(6)]
    # three forename bigrams twice, three surname bigrams once; ties in canonical order
    assert names == ["␣A_f", "AB_f", "B␣_f", "␣C_s", "CD_s", "D␣_s"]
    assert list(ranking.counts[:7]) == [2, 2, 2, 1, 1, 1, 0]
    with pytest.raises(ValueError):
        asg.build_E([])


def test_build_E_cross_tag_oracle(rng):
    names = ["Anna", "Jan", "Eva", "Otto"]
    recs = [Record(str(i), names[rng.integers(4)], names[rng.integers(4)], names[rng.integers(4)])
            for i in range(60)]
    ranking, e = asg.build_E(recs)
    sets = [record_bigrams(r) for r in recs]
    for i, j in [(0, 1), (0, 5), (2, 9), (3, 17), (1, 30)]:
        bi, bj = ranking.bigram(i), ranking.bigram(j)
        t = sum(bi in s and bj in s for s in sets)
        assert e[i, j] == t / len(recs)
    assert (e == e.T).all() and (np.diag(e) == 0).all() and e.max() <= 1


def test_schc_trigram_block():
    recs = [Record(str(i), "", s, "") for i, s in
            enumerate(["Schmidt", "Schneider", "Fischer", "Schulz", "Wagner", "Becker", "Schaefer", "Koch"] * 5)]
    ranking, e = asg.build_E(recs)
    pos = {str(ranking.bigram(i)): i for i in range(N_BIGRAMS)}
    surname = [i for i in range(N_BIGRAMS) if ranking.bigram(i).tag == IdentifierTag.SURNAME
               and ranking.counts[i] > 0]
    block = e[np.ix_(surname, surname)]
    value = e[pos["SC_s"], pos["CH_s"]]
    assert value >= np.sort(block, axis=None)[-10]


def test_build_D_counts():
    m = np.array([[1, 1, 0], [1, 1, 1], [0, 0, 0], [1, 0, 1]], dtype=bool)
    d = asg.build_D(m, dim=5)
    # filter 2 holds no atom and does not count towards N
    assert d.shape == (5, 5)
    assert d[0, 1] == 2 / 3 and d[0, 2] == 2 / 3 and d[1, 2] == 1 / 3
    assert (np.diag(d) == 0).all() and (d[3:] == 0).all() and (d[:, 3:] == 0).all()
    assert asg.build_D(np.array([[1, 0], [0, 1]], bool), 2)[0, 1] == 0
    assert asg.build_D(np.array([[1, 1], [1, 1]], bool), 2)[0, 1] == 1.0
    with pytest.raises(ValueError):
        asg.build_D(np.ones((2, 4), bool), dim=3)


# objective and swap deltas

def test_objective_trivial(rng):
    e = cooccurrence_instance(rng, 12)
    assert asg.objective(np.arange(12), e, e) == 0
    d = cooccurrence_instance(rng, 12)
    z = np.zeros_like(d)
    assert asg.objective(rng.permutation(12), d, z) == pytest.approx(d.sum())
    sigma = rng.permutation(12)
    assert asg.objective(sigma, d, e) == pytest.approx(brute_objective(sigma, d, e), rel=1e-12)
    with pytest.raises(ValueError):
        asg.objective(np.arange(11), d, e)


def test_swap_delta_thousand_random_proposals(rng):
    n = 40
    d, e = cooccurrence_instance(rng, n), cooccurrence_instance(rng, n)
    sigma = rng.permutation(n)
    for _ in range(1000):
        a, b = rng.choice(n, 2, replace=False)
        swapped = sigma.copy()
        swapped[[a, b]] = swapped[[b, a]]
        full = asg.objective(swapped, d, e) - asg.objective(sigma, d, e)
        delta = asg.swap_delta(sigma, d, e, a, b)
        assert delta == pytest.approx(full, rel=1e-9, abs=1e-12)
        if rng.random() < 0.3:
            sigma = swapped


@settings(max_examples=60, deadline=None)
@given(st.integers(3, 15), st.integers(0, 2**32 - 1), st.data())
def test_swap_delta_property(n, seed, data):
    rng = np.random.default_rng(seed)
    d, e = cooccurrence_instance(rng, n, 50), cooccurrence_instance(rng, n, 50)
    sigma = rng.permutation(n)
    a = data.draw(st.integers(0, n - 1))
    b = data.draw(st.integers(0, n - 1).filter(lambda x: x != a))
    swapped = sigma.copy()
    swapped[[a, b]] = swapped[[b, a]]
    assert asg.swap_delta(sigma, d, e, a, b) == pytest.approx(
        brute_objective(swapped, d, e) - brute_objective(sigma, d, e), rel=1e-9, abs=1e-12)


def test_swap_delta_edge_cases(rng):
    e = cooccurrence_instance(rng, 6)
    with pytest.raises(ValueError):
        asg.swap_delta(np.arange(6), e, e, 2, 2)
    for a, b in itertools.combinations(range(6), 2):
        assert asg.swap_delta(np.arange(6), e, e, a, b) >= 0
    # identical rows a, b in both matrices
    twin = np.zeros((4, 4))
    twin[0, 2] = twin[2, 0] = twin[1, 2] = twin[2, 1] = 0.5
    assert asg.swap_delta(np.arange(4), twin, twin, 0, 1) == 0


# optimizer

def test_optimize_on_equal_matrices(rng):
    e = cooccurrence_instance(rng, 20)
    r = asg.optimize(e, e)
    assert r.update_count == 0 and r.objective_value == 0
    assert (r.sigma == np.arange(20)).all()


def test_exhaustive_optimum_n8():
    hits = 0
    for seed in range(100):
        rng = np.random.default_rng(seed)
        e = cooccurrence_instance(rng, 8)
        d = planted(e, rng.permutation(8))
        best = np.abs(d[PERMS8[:, :, None], PERMS8[:, None, :]] - e).sum(axis=(1, 2)).min()
        hits += asg.optimize(d, e).objective_value <= best + 1e-9
    assert hits == 100


def test_matches_reference_loop(rng):
    for _ in range(15):
        n = int(rng.integers(5, 25))
        d, e = cooccurrence_instance(rng, n, 60), cooccurrence_instance(rng, n, 60)
        fast, slow = asg.optimize(d, e), asg.optimize_reference(d, e)
        assert (fast.sigma == slow.sigma).all()
        assert fast.update_count == slow.update_count
        np.testing.assert_allclose(fast.progress, slow.progress, rtol=1e-9, atol=1e-12)


def test_planted_n200_reaches_zero():
    rng = np.random.default_rng(2)
    e = cooccurrence_instance(rng, 200, 500)
    perm = rng.permutation(200)
    r = asg.optimize(planted(e, perm), e)
    assert r.objective_value <= 1e-9
    assert (r.sigma == perm).all()


def test_progress_strictly_decreasing_and_consistent(rng):
    d, e = cooccurrence_instance(rng, 60), cooccurrence_instance(rng, 60)
    seen = []
    r = asg.optimize(d, e, on_update=lambda i, v: seen.append((i, v)))
    prog = np.array(r.progress)
    assert (np.diff(prog) < 0).all()
    assert len(prog) == r.update_count + 1
    assert [v for _, v in seen] == r.progress
    assert r.objective_value == pytest.approx(asg.objective(r.sigma, d, e), rel=1e-9)
    assert r.objective_value == pytest.approx(prog[-1], rel=1e-9)
    assert sorted(r.sigma) == list(range(60))
    # inputs untouched
    assert (d == d.T).all() and (np.diag(d) == 0).all()


def test_max_updates_and_resync(rng):
    d, e = cooccurrence_instance(rng, 30), cooccurrence_instance(rng, 30)
    capped = asg.optimize(d, e, max_updates=5)
    assert capped.update_count == 5
    assert (asg.optimize(d, e, resync_every=3).sigma == asg.optimize(d, e).sigma).all()


def test_shape_errors():
    with pytest.raises(ValueError):
        asg.optimize(np.zeros((3, 3)), np.zeros((4, 4)))


def test_files_round_trip(tmp_path, rng):
    recs = [Record(str(i), "Eva", "Roth", "Ulm") for i in range(3)]
    ranking, e = asg.build_E(recs, dim=20)
    sigma = np.arange(20)[::-1].copy()
    a = asg.Assignment(sigma, 1.5, 3, [3.0, 2.0, 1.5])
    asg.write_sigma(tmp_path / "s.csv", a, ranking, n_atoms=5)
    mapping = asg.read_sigma(tmp_path / "s.csv")
    # bigram ranks 16..20 point at atoms 5..1; the rest are virtual
    assert mapping == {21 - r: ranking.bigram(r - 1) for r in range(16, 21)}
    asg.write_progress(tmp_path / "p.csv", a.progress)
    assert asg.read_progress(tmp_path / "p.csv") == [(0, 3.0), (1, 2.0), (2, 1.5)]
    asg.write_frequencies(tmp_path / "f.csv", ranking)
    freq = asg.read_frequencies(tmp_path / "f.csv")
    assert freq[0] == (ranking.bigram(0), 3) and len(freq) == 20
