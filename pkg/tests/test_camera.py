import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from oracles import fuse_loop
from picol.camera import action_set, fuse, join, observe
from picol.errors import DimensionMismatch, IsolatedNode
from picol.network import RoadGraph, build_graph


def covered(g, row):
    return {g.edge_names[k] for k in np.flatnonzero(row)}


def test_node_one_actions(graph):
    s = action_set(graph, 1)
    assert s.neighbors == (2, 3, 8, 70, 71)
    expect = {2: {"1-2", "2-1"}, 70: {"1-70"}, 71: {"71-1"}, 8: {"1-8"}, 3: {"3-1"}}
    for j, want in expect.items():
        assert covered(graph, s.actions[s.index(j)]) == want


def test_single_inbound_edge():
    g = build_graph([(1, 2), (3, 1)])
    s = action_set(g, 3)
    assert len(s) == 1 and s.actions.sum() == 1


def test_isolated_node():
    g = RoadGraph([(1, 2)], nodes=[9])
    with pytest.raises(IsolatedNode):
        action_set(g, 9)


def test_action_set_invariants(graph):
    for n in graph.nodes:
        s = action_set(graph, n)
        assert list(s.neighbors) == sorted(s.neighbors)
        assert len({r.tobytes() for r in s.actions}) == len(s)
        for row in s.actions:
            assert 1 <= row.sum() <= 2
            assert all(n in graph.edge_of(k) for k in np.flatnonzero(row))


def test_join():
    a = np.array([1, 1, 0, 0, 0], bool)
    b = np.array([0, 0, 1, 1, 0], bool)
    assert join([a, b]).sum() == 4
    assert join([a, a]).tolist() == a.tolist()
    assert not join([a, b])[4]


def test_observe_examples():
    assert observe([5.0, 3.0], [1, 0]).tolist() == [5.0, 0.0]
    s = np.array([1.0, 2.0, 3.0])
    assert np.array_equal(observe(s, np.ones(3)), s)
    assert np.array_equal(observe(s, np.zeros(3)), np.zeros(3))
    with pytest.raises(DimensionMismatch):
        observe(s, np.ones(2))


def test_fuse_examples():
    f = fuse([5.0, 0.0], [9.0, 4.0], [1, 0])
    assert f.values.tolist() == [5.0, 4.0]
    assert f.provenance == ["observed", "predicted"]
    s, p = np.array([2.0, 7.0]), np.array([1.0, 1.0])
    assert np.array_equal(fuse(observe(s, np.ones(2)), p, np.ones(2)).values, s)
    assert np.array_equal(fuse(observe(s, np.zeros(2)), p, np.zeros(2)).values, p)
    with pytest.raises(DimensionMismatch):
        fuse(s, p, np.ones(3))


vec = arrays(np.float64, 6, elements=st.floats(0, 1e6))
mask = arrays(bool, 6)


@settings(max_examples=200, deadline=None)
@given(s=vec, pred=vec, a=mask)
def test_fusion_properties(s, pred, a):
    o = observe(s, a)
    assert np.array_equal(observe(o, a), o)
    f = fuse(o, pred, a)
    assert np.array_equal(f.values, fuse_loop(s, pred, a))
    assert np.array_equal(f.observed, a)
    assert np.array_equal(fuse(o, s, a).values, s)
    err_f = np.abs(f.values - s)
    assert np.all(err_f[a] == 0)
    assert err_f.sum() <= np.abs(pred - s)[~a].sum() + 1e-9
