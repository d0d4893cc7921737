import json

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy.cluster.hierarchy import linkage as scipy_linkage
from scipy.spatial.distance import squareform

from hiertree import (
    LINKAGES,
    DegenerateInputError,
    Dendrogram,
    ValidationError,
    agglomerate,
    confidence_distance,
    count_cooccurrences,
    cut,
    export_tree,
)
from oracles import brute_cut, dendrogram_leaf_merges, naive_linkage


def random_distances(rng, n, distinct=True):
    if distinct:
        vals = rng.permutation(n * (n - 1) // 2) + rng.random(n * (n - 1) // 2) * 0.5
        vals = vals / vals.max()
    else:
        vals = rng.integers(1, 4, size=n * (n - 1) // 2).astype(float)
    return squareform(vals)


def assert_same_merges(tree, reference, tol=1e-9):
    got = dendrogram_leaf_merges(tree)
    assert len(got) == len(reference)
    for step, ((a, b, h), (ra, rb, rh)) in enumerate(zip(got, reference)):
        assert {a, b} == {ra, rb}, f"step {step}: merged {sorted(a)}+{sorted(b)}, expected {sorted(ra)}+{sorted(rb)}"
        assert abs(h - rh) <= tol, f"step {step}: height {h} vs {rh}"


ABC = np.array([[0, 0.1, 0.5], [0.1, 0, 0.4], [0.5, 0.4, 0]])


def test_three_leaves_single():
    t = agglomerate(ABC, "single")
    assert [(m.left, m.right, m.height, m.size) for m in t.merges] == [(0, 1, 0.1, 2), (2, 3, 0.4, 3)]


def test_three_leaves_complete():
    t = agglomerate(ABC, "complete")
    assert [(m.left, m.right, m.height) for m in t.merges] == [(0, 1, 0.1), (2, 3, 0.5)]


def test_f1_ward(f1_dataset):
    D = confidence_distance(count_cooccurrences(f1_dataset))
    t = agglomerate(D, "ward")
    d = 1 - np.sqrt(1 / 6)
    expected = np.sqrt((2 * d**2 + 2 * d**2 - (1 / 3) ** 2) / 3)
    assert t.merges[0].height == pytest.approx(1 / 3, abs=1e-15)
    assert t.merges[1].height == pytest.approx(expected, abs=1e-12)
    assert t.merges[1].height == pytest.approx(0.6556, abs=5e-5)


@pytest.mark.parametrize("method", LINKAGES)
def test_matches_naive_oracle(method):
    rng = np.random.default_rng(11)
    for _ in range(25):
        D = random_distances(rng, int(rng.integers(2, 11)))
        assert_same_merges(agglomerate(D, method), naive_linkage(D.tolist(), method))


def test_ward_closed_form_agrees_with_recursive_update():
    rng = np.random.default_rng(12)
    for _ in range(20):
        D = random_distances(rng, int(rng.integers(3, 10))).tolist()
        assert_same_merges(agglomerate(np.array(D), "ward"), naive_linkage(D, "ward_recursive"))


@pytest.mark.parametrize("method", ["single", "complete", "weighted"])
def test_tie_rule_matches_oracle(method):
    # small integer distances tie constantly and stay exact under these updates
    rng = np.random.default_rng(13)
    for _ in range(40):
        D = random_distances(rng, int(rng.integers(2, 10)), distinct=False)
        assert_same_merges(agglomerate(D, method), naive_linkage(D.tolist(), method), tol=0)


def test_all_equal_distances_tie_order():
    D = np.ones((4, 4)) - np.eye(4)
    t = agglomerate(D, "single")
    assert [(m.left, m.right) for m in t.merges] == [(0, 1), (2, 3), (4, 5)]


@pytest.mark.parametrize("method", LINKAGES)
def test_matches_scipy(method):
    rng = np.random.default_rng(14)
    for _ in range(10):
        D = random_distances(rng, int(rng.integers(2, 25)))
        ref = scipy_linkage(squareform(D), method=method)
        t = agglomerate(D, method)
        np.testing.assert_allclose(t.heights, ref[:, 2], atol=1e-12)
        assert [{int(a), int(b)} for a, b in ref[:, :2]] == [{m.left, m.right} for m in t.merges]


@pytest.mark.parametrize("method", LINKAGES)
def test_heights_monotone(method):
    rng = np.random.default_rng(15)
    for _ in range(50):
        D = random_distances(rng, int(rng.integers(2, 30)), distinct=bool(rng.integers(2)))
        assert np.all(np.diff(agglomerate(D, method).heights) >= 0)


@pytest.mark.parametrize("method", LINKAGES)
def test_deterministic(method):
    D = random_distances(np.random.default_rng(16), 40)
    assert agglomerate(D, method) == agglomerate(D, method)


@pytest.mark.parametrize("method", LINKAGES)
def test_leaf_permutation_equivariance(method):
    rng = np.random.default_rng(17)
    D = random_distances(rng, 15)
    perm = rng.permutation(15)  # new id i holds old label perm[i]
    base = dendrogram_leaf_merges(agglomerate(D, method))
    permuted = dendrogram_leaf_merges(agglomerate(D[np.ix_(perm, perm)], method))
    mapped = [(frozenset(perm[list(a)]), frozenset(perm[list(b)]), h) for a, b, h in permuted]
    for (a, b, h), (ra, rb, rh) in zip(mapped, base):
        assert {a, b} == {ra, rb} and h == pytest.approx(rh, abs=1e-12)


def test_dendrogram_structure():
    t = agglomerate(random_distances(np.random.default_rng(18), 12), "average")
    children = [c for m in t.merges for c in (m.left, m.right)]
    assert sorted(children) == list(range(2 * 12 - 2))
    assert t.merges[-1].size == 12
    for j, m in enumerate(t.merges):
        assert m.size == t.size_of(m.left) + t.size_of(m.right) == t.size_of(12 + j)


def test_bad_inputs():
    with pytest.raises(ValidationError):
        agglomerate(np.zeros((1, 1)))
    with pytest.raises(ValidationError):
        agglomerate(ABC, "centroid")
    bad = ABC.copy()
    bad[0, 2] = np.nan
    with pytest.raises(DegenerateInputError):
        agglomerate(bad)
    asym = ABC.copy()
    asym[0, 1] = 0.2
    with pytest.raises(ValidationError):
        agglomerate(asym)
    with pytest.raises(ValidationError):
        Dendrogram(3, ((0, 1, 0.1, 2), (0, 3, 0.2, 3)))


# -- cut ----------------------------------------------------------------------

def test_cut_endpoints():
    t = agglomerate(random_distances(np.random.default_rng(19), 9), "ward")
    assert cut(t, 9).member == tuple(range(9))
    assert cut(t, 1).member == (0,) * 9
    with pytest.raises(ValidationError):
        cut(t, 0)
    with pytest.raises(ValidationError):
        cut(t, 10)


def test_f1_single_cut(f1_dataset):
    stats = count_cooccurrences(f1_dataset)
    t = agglomerate(confidence_distance(stats), "single")
    names = t.leaf_names()
    clusters = [{names[i] for i in c} for c in cut(t, 2).clusters]
    assert clusters == [{"a", "b"}, {"c"}]


def test_cut_indices_follow_smallest_member():
    t = agglomerate(random_distances(np.random.default_rng(20), 14), "complete")
    for k in range(1, 15):
        a = cut(t, k)
        firsts = [min(c) for c in a.clusters]
        assert firsts == sorted(firsts)


distance_matrices = st.integers(2, 16).flatmap(
    lambda n: st.lists(st.floats(0, 1), min_size=n * (n - 1) // 2, max_size=n * (n - 1) // 2)
)


@settings(max_examples=100, deadline=None)
@given(distance_matrices, st.sampled_from(LINKAGES))
def test_cut_properties(vals, method):
    D = squareform(np.array(vals))
    t = agglomerate(D, method)
    n = t.n_leaves
    parts = {}
    for k in range(1, n + 1):
        a = cut(t, k)
        assert len(set(a.member)) == k
        parts[k] = {frozenset(c) for c in a.clusters}
        assert parts[k] == brute_cut(t, k)
    for k in range(1, n + 1):
        for k2 in range(1, k):
            for c in parts[k]:
                assert any(c <= coarse for coarse in parts[k2])


# -- export -------------------------------------------------------------------

def test_newick_two_leaves():
    t = agglomerate(np.array([[0, 0.3], [0.3, 0]]), "single")
    assert export_tree(t, ["a", "b"], "newick") == "(a:0.3,b:0.3);\n"


def test_newick_f1_branch_lengths(f1_dataset):
    t = agglomerate(confidence_distance(count_cooccurrences(f1_dataset)), "single")
    text = export_tree(t, format="newick")
    assert text == "(c:0.591751709536,(a:0.333333333333,b:0.333333333333):0.258418376203);\n"


def test_newick_quotes_names():
    t = agglomerate(np.array([[0, 0.5], [0.5, 0]]), "single")
    text = export_tree(t, ["shooting goal (soccer)", "it's"], "newick")
    assert text == "('shooting goal (soccer)':0.5,'it''s':0.5);\n"


def test_json_round_trip_is_byte_identical():
    t = agglomerate(random_distances(np.random.default_rng(21), 20), "weighted")
    text = export_tree(t, [f"label {i}" for i in range(20)], "json")
    again = Dendrogram.from_json(text)
    assert export_tree(again, format="json") == text
    assert again.merges == t.merges
    assert json.loads(text)["merges"][0][:2] == [t.merges[0].left, t.merges[0].right]


def test_dot_export():
    t = agglomerate(ABC, "single")
    dot = export_tree(t, ["A", "B", 'say "hi"'], "dot")
    assert dot.startswith("digraph dendrogram {")
    assert 'n2 [label="say \\"hi\\""];' in dot
    assert "n4 -> n2;" in dot and "n4 -> n3;" in dot
    assert dot.count("->") == 2 * 2


def test_scale_600_labels_is_fast():
    import time

    D = random_distances(np.random.default_rng(22), 600)
    for method in LINKAGES:
        start = time.perf_counter()
        agglomerate(D, method)
        assert time.perf_counter() - start < 1.0
