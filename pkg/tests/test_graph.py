import numpy as np
import pytest
import scipy.sparse as sp
from hypothesis import given, settings, strategies as st

from graphite.graph import GraphError, build_graph, check_assumptions, shared_feature_pairs, to_csr


def test_dedup_and_self_loops():
    g = build_graph([(1, 0), (0, 1), (2, 2)], None, num_nodes=3, num_features=0)
    assert g.num_nodes == 3
    assert g.edges.tolist() == [[0, 1]]


def test_fig1_graph_is_valid(fig1):
    assert fig1.num_nodes == 5
    assert fig1.feature_nnz == 5
    assert fig1.num_features == 2


def test_duplicate_sparse_entry_stores_single_one():
    x = sp.coo_matrix((np.ones(3), ([0, 0, 1], [1, 1, 0])), shape=(2, 2))
    g = build_graph([(0, 1)], x, num_nodes=2)
    assert g.features.nnz == 2
    assert set(g.features.data.tolist()) == {1.0}


def test_non_binary_values_rejected():
    with pytest.raises(GraphError, match="non-binary"):
        build_graph([(0, 1)], np.array([[0.5, 0], [0, 1]]), num_nodes=2)


def test_out_of_range_endpoint_rejected():
    with pytest.raises(GraphError):
        build_graph([(0, 5)], None, num_nodes=3)


def test_label_out_of_range_rejected():
    with pytest.raises(GraphError):
        build_graph([(0, 1)], None, [0, 3], num_nodes=2, num_classes=2)


def test_fig1_similar_nonadjacent_pair(fig1):
    rep = check_assumptions(fig1)
    assert rep.exists_similar_nonadjacent_pair
    assert rep.hom_lt_one
    assert rep.heterophilic


def test_complete_graph_sharing_one_feature_is_fully_homophilic():
    n = 5
    edges = [(u, v) for u in range(n) for v in range(u + 1, n)]
    g = build_graph(edges, [{0}] * n, num_nodes=n)
    rep = check_assumptions(g)
    assert not rep.hom_lt_one
    assert not rep.heterophilic


def test_unused_feature_column_reported():
    g = build_graph([(0, 1)], [{0}, {0}], num_nodes=2, num_features=3)
    assert not check_assumptions(g).every_feature_used


def test_assumptions_need_edges():
    g = build_graph([], [{0}, {0}], num_nodes=2)
    with pytest.raises(GraphError):
        check_assumptions(g)


def test_csr_path():
    g = build_graph([(0, 1), (1, 2)], None, num_nodes=3)
    a = to_csr(g)
    assert a.indptr.tolist() == [0, 1, 3, 4]
    assert a.nnz == 4
    assert a.is_symmetric()


def test_csr_empty():
    a = to_csr(build_graph([], None, num_nodes=4))
    assert a.indptr.tolist() == [0, 0, 0, 0, 0]


def test_csr_fig1(fig1):
    a = to_csr(fig1)
    assert a.nnz == 2 * fig1.num_edges
    assert [a.degree(u) for u in range(5)] == fig1.degrees.tolist()


@settings(max_examples=60, deadline=None)
@given(st.lists(st.tuples(st.integers(0, 14), st.integers(0, 14)), max_size=60))
def test_canonical_edges_properties(raw):
    g = build_graph(raw, None, num_nodes=15)
    e = g.edges
    assert (e[:, 0] < e[:, 1]).all()
    assert len({tuple(r) for r in e.tolist()}) == len(e)
    expect = {(min(u, v), max(u, v)) for u, v in raw if u != v}
    assert set(map(tuple, e.tolist())) == expect
    assert to_csr(g).is_symmetric()


@settings(max_examples=40, deadline=None)
@given(st.integers(0, 2**31 - 1))
def test_shared_pairs_match_brute_force(seed):
    rng = np.random.default_rng(seed)
    x = (rng.random((12, 6)) < 0.3).astype(float)
    got = shared_feature_pairs(sp.csr_matrix(x)).tolist()
    want = [[u, v] for u in range(12) for v in range(u + 1, 12) if (x[u] * x[v]).any()]
    assert got == want
