import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from oracles import BUNDLED_EDGES
from picol.errors import DuplicateEdge, EmptyGraph, GraphError, SelfLoop, UnknownEdge, UnknownNode
from picol.network import (CameraPlacement, RoadGraph, build_graph, bundled_graph, default_placement,
                           edge_adjacency, read_graph_csv, read_placement_csv, write_graph_csv,
                           write_placement_csv)


def test_two_edge_cycle_indexing():
    g = build_graph([(2, 1), (1, 2)])
    assert g.E == 2
    assert g.edge_index == {(1, 2): 0, (2, 1): 1}


def test_bundled_network_shape():
    g = build_graph(BUNDLED_EDGES)
    assert g.E == 19
    assert len(g.nodes) == 13
    assert g == bundled_graph()


@pytest.mark.parametrize("edges,err", [([(1, 1)], SelfLoop), ([], EmptyGraph),
                                       ([(1, 2), (1, 2)], DuplicateEdge)])
def test_invalid_edge_lists(edges, err):
    with pytest.raises(err):
        build_graph(edges)


def test_canonical_order_is_lexicographic():
    g = build_graph([(3, 1), (1, 3), (2, 5), (1, 2)])
    assert g.edges == ((1, 2), (1, 3), (2, 5), (3, 1))


def test_index_round_trip(graph):
    for k in range(graph.E):
        assert graph.index_of(graph.edge_of(k)) == k
    assert graph.index_of("4-2") == graph.index_of((4, 2))
    with pytest.raises(UnknownEdge):
        graph.index_of((8, 1))


def test_unknown_node(graph):
    with pytest.raises(UnknownNode):
        graph.neighbors(99)


def test_adjacency_small_cases():
    assert edge_adjacency(build_graph([(1, 2), (2, 1)])).matrix.tolist() == [[1, 1], [1, 1]]
    assert edge_adjacency(build_graph([(1, 2)])).matrix.tolist() == [[1]]


def test_adjacency_row_for_4_2(graph):
    row = edge_adjacency(graph).matrix[graph.index_of((4, 2))]
    expected = {(4, 2), (2, 1), (2, 4), (2, 10)}
    assert {graph.edge_of(k) for k in np.flatnonzero(row)} == expected


def test_adjacency_definition_against_loop(graph):
    adj = edge_adjacency(graph)
    for e, (te, he) in enumerate(graph.edges):
        for f, (tf, hf) in enumerate(graph.edges):
            assert adj.matrix[e, f] == float(e == f or he == tf)
    assert np.array_equal(adj.degree, adj.matrix.sum(axis=1))
    assert np.all(adj.degree >= 1)
    assert np.allclose(adj.normalized.sum(axis=1), 1.0, atol=1e-12)


@settings(max_examples=40, deadline=None)
@given(st.permutations(sorted(bundled_graph().nodes)))
def test_relabel_commutes_with_adjacency(perm):
    g = bundled_graph()
    mapping = dict(zip(sorted(g.nodes), perm))
    h = g.relabel(mapping)
    # P maps edge index in g to edge index in h
    P = np.zeros((g.E, g.E))
    for k, (t, hd) in enumerate(g.edges):
        P[k, h.index_of((mapping[t], mapping[hd]))] = 1
    assert np.array_equal(P.T @ edge_adjacency(g).matrix @ P, edge_adjacency(h).matrix)


def test_default_placement(graph):
    assert default_placement(graph).camera_nodes == (1, 2, 3, 4, 5, 6)


def test_placement_validation(graph):
    with pytest.raises(UnknownNode):
        CameraPlacement((1, 99)).validate(graph)
    with pytest.raises(GraphError):
        CameraPlacement((1, 1)).validate(graph)
    g = RoadGraph([(1, 2)], nodes=[7])
    with pytest.raises(GraphError):
        CameraPlacement((7,)).validate(g)


def test_csv_round_trips(tmp_path, graph):
    write_graph_csv(graph, tmp_path / "g.csv")
    assert read_graph_csv(tmp_path / "g.csv") == graph
    pl = default_placement(graph)
    write_placement_csv(pl, tmp_path / "c.csv")
    assert read_placement_csv(tmp_path / "c.csv") == pl
