import pytest
from hypothesis import given, settings, strategies as st

from qpp.brep import Face
from qpp.graphdiff import (
    ADDED,
    LOST,
    ConnectionGraph,
    build_connection_graph,
    diff_connection_graphs,
    graph_subtract,
)


def _face(edge_ids):
    return Face("f", "s", [[(e, 1) for e in edge_ids]])


def test_square_face_cycle():
    face = _face(["e1", "e2", "e3", "e4"])
    g = build_connection_graph(face, [("e1", "e2"), ("e2", "e3"), ("e3", "e4"), ("e4", "e1")])
    assert g.nodes == frozenset({"e1", "e2", "e3", "e4"})
    assert len(g.arcs) == 4


def test_closed_edge_is_lone_node():
    face = Face("f", "s", [[("ring", 1)]])
    g = build_connection_graph(face, [])
    assert g.nodes == frozenset({"ring"})
    assert g.arcs == {}


def test_rod_analogue_gains_arc():
    # Pre/post boundary graphs in the style of a connecting-rod plate face:
    # a 6-edge outline where the edit brings e1 and e5 into contact.
    edges = ["e1", "e2", "e3", "e4", "e5", "e6"]
    cycle = [(edges[i], edges[(i + 1) % 6]) for i in range(6)]
    pre = build_connection_graph(_face(edges), cycle)
    post = build_connection_graph(_face(edges), cycle + [("e1", "e5")])
    diff = diff_connection_graphs(pre, post)
    assert [a.pair for a in diff.arcs] == [("e1", "e5")]
    assert diff.arcs[0].origin == ADDED


def test_unknown_edge_rejected():
    face = _face(["a", "b"])
    with pytest.raises(ValueError):
        build_connection_graph(face, [("a", "zzz")])


def test_subtract_definition():
    g1 = ConnectionGraph({"a", "b", "c"}, {("a", "b"): 1, ("b", "c"): 1})
    g2 = ConnectionGraph({"b", "c"}, {("b", "c"): 1})
    out = graph_subtract(g1, g2)
    assert out.nodes == frozenset({"a", "b"})
    assert out.arc_set() == {("a", "b")}


def test_subtract_self_is_empty():
    g = ConnectionGraph({"a", "b"}, {("a", "b"): 1})
    out = graph_subtract(g, g)
    assert out.nodes == frozenset()
    assert out.arcs == {}


def test_subtract_disjoint():
    g1 = ConnectionGraph({"a", "b"}, {("a", "b"): 1})
    g2 = ConnectionGraph({"c", "d"}, {("c", "d"): 1})
    out = graph_subtract(g1, g2)
    assert out.arc_set() == {("a", "b")}
    assert out.nodes == frozenset({"a", "b"})


def test_diff_identical_graphs_empty():
    g = ConnectionGraph({"a", "b", "c"}, {("a", "b"): 1, ("b", "c"): 2})
    assert diff_connection_graphs(g, g).empty


def test_diff_lost_arc():
    ref = ConnectionGraph({"e2", "e3"}, {("e2", "e3"): 1})
    reg = ConnectionGraph({"e2", "e3"}, {})
    diff = diff_connection_graphs(ref, reg)
    assert len(diff.arcs) == 1
    assert diff.arcs[0].origin == LOST
    assert diff.arcs[0].pair == ("e2", "e3")


def test_count_change_flagged():
    ref = ConnectionGraph({"a", "b"}, {("a", "b"): 1})
    reg = ConnectionGraph({"a", "b"}, {("a", "b"): 2})
    diff = diff_connection_graphs(ref, reg)
    assert len(diff.arcs) == 1
    assert diff.arcs[0].origin == ADDED
    assert diff.arcs[0].count_changed_only


# -- randomized algebra ---------------------------------------------------

_names = st.sampled_from([f"e{i}" for i in range(8)])


@st.composite
def graphs(draw):
    pairs = draw(st.sets(st.tuples(_names, _names).filter(lambda p: p[0] != p[1]), max_size=12))
    arcs = {}
    for a, b in pairs:
        pair = (a, b) if a < b else (b, a)
        arcs[pair] = draw(st.integers(min_value=1, max_value=3))
    nodes = {n for p in arcs for n in p} | draw(st.sets(_names, max_size=4))
    return ConnectionGraph(nodes, arcs)


@settings(max_examples=2500, deadline=None)
@given(graphs(), graphs())
def test_diff_is_symmetric_difference_with_swapped_tags(g1, g2):
    d12 = diff_connection_graphs(g1, g2)
    d21 = diff_connection_graphs(g2, g1)
    sym = set(g1.arcs) ^ set(g2.arcs)
    counted = {p for p in set(g1.arcs) & set(g2.arcs) if g1.arcs[p] != g2.arcs[p]}
    assert {a.pair for a in d12.arcs} == sym | counted
    flip = {ADDED: LOST, LOST: ADDED}
    assert {(a.pair, a.origin) for a in d21.arcs} == {(a.pair, flip[a.origin]) for a in d12.arcs}


@settings(max_examples=2500, deadline=None)
@given(graphs())
def test_diff_with_self_is_empty(g):
    assert diff_connection_graphs(g, g).empty


@settings(max_examples=2500, deadline=None)
@given(graphs(), graphs())
def test_induced_nodes_have_degree(g1, g2):
    d = diff_connection_graphs(g1, g2)
    for n in d.nodes:
        assert any(n in a.pair for a in d.arcs)


@settings(max_examples=2500, deadline=None)
@given(graphs(), graphs())
def test_tag_provenance(g1, g2):
    d = diff_connection_graphs(g1, g2)
    for a in d.arcs:
        if a.origin == ADDED:
            assert g2.arcs.get(a.pair, 0) > g1.arcs.get(a.pair, 0)
        else:
            assert g1.arcs.get(a.pair, 0) > g2.arcs.get(a.pair, 0)


@settings(max_examples=1000, deadline=None)
@given(graphs(), graphs())
def test_subtract_induced_node_law(g1, g2):
    out = graph_subtract(g1, g2)
    assert out.nodes == frozenset(n for p in out.arcs for n in p)
