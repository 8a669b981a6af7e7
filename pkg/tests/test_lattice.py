"""Domain graph construction, merging, duals and serialization."""

import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from currentlab.lattice import (
    Annulus,
    DomainGraph,
    FaceGrid,
    MergeClass,
    Quad,
    boundary_neighborhood,
    build_annulus,
    build_box,
    build_grid,
    build_rect_quad,
    canon_edge,
    domain_from_vertices,
    dual_of,
    from_text,
    merge_vertices,
    to_text,
)


def test_canon_edge_orders_endpoints():
    assert canon_edge((1, 0), (0, 0)) == ((0, 0), (1, 0))
    assert canon_edge((0, 1), (0, 0)) == ((0, 0), (0, 1))
    assert canon_edge((0, 0), (1, 0)) == ((0, 0), (1, 0))


@pytest.mark.parametrize("n", [1, 2, 5])
def test_box_counts(n):
    g = build_box(n)
    side = 2 * n + 1
    assert g.n_vertices == side * side
    assert g.n_edges == 2 * side * (side - 1)


def test_grid_counts():
    g = build_grid(3, 2)
    assert g.n_vertices == 6
    assert g.n_edges == 7  # 4 horizontal + 3 vertical


def test_vertices_sorted_canonically():
    g = domain_from_vertices([(1, 1), (0, 0), (1, 0), (0, 1)])
    assert g.vertex_list() == [(0, 0), (0, 1), (1, 0), (1, 1)]
    for a, b in g.edge_list():
        assert canon_edge(a, b) == (a, b)
    el = g.edge_list()
    assert el == sorted(el)


def test_boundary_of_small_box():
    g = build_box(2)
    bv = set(g.boundary_vertices())
    expect = {(x, y) for x in range(-2, 3) for y in range(-2, 3)
              if max(abs(x), abs(y)) == 2}
    assert bv == expect


def test_interior_box_has_no_missing_neighbors():
    g = build_box(3)
    bv = set(g.boundary_vertices())
    for v in g.vertex_list():
        if v not in bv:
            for dx, dy in ((1, 0), (-1, 0), (0, 1), (0, -1)):
                assert (v[0] + dx, v[1] + dy) in g.vertex_set()


def test_outer_walk_square():
    g = build_grid(2, 2)
    walk = g.outer_walk()
    assert walk[0] == ((0, 0), (1, 0))
    assert len(walk) == 4
    assert {canon_edge(*e) for e in walk} == g.edge_set()
    # closed: each step starts where the previous ended
    for (a, b), (c, d) in zip(walk, walk[1:] + walk[:1]):
        assert b == c


def test_outer_walk_path_traverses_thin_edges_twice():
    g = domain_from_vertices([(0, 0), (1, 0), (2, 0)])
    walk = g.outer_walk()
    # out and back: every undirected edge appears in both directions
    assert len(walk) == 4
    assert walk[0] == ((0, 0), (1, 0))
    from collections import Counter
    cnt = Counter(canon_edge(*e) for e in walk)
    assert all(v == 2 for v in cnt.values())


def test_outer_walk_requires_connected():
    g = domain_from_vertices([(0, 0), (1, 0), (5, 5), (6, 5)])
    with pytest.raises(ValueError):
        g.outer_walk()


def test_merge_contiguous_class_ids():
    g = build_grid(3, 2)
    m = merge_vertices(g, [(None, [(0, 0), (2, 1)])])
    ids = m.class_ids()
    assert sorted(set(ids)) == list(range(m.n_classes))
    assert m.n_classes == g.n_vertices - 1


def test_merge_composition_absorbs():
    g = build_grid(3, 2)
    m1 = merge_vertices(g, [("wire", [(0, 0), (2, 0)])])
    m2 = merge_vertices(m1, [(None, [(2, 0), (2, 1)])])
    assert m2.n_classes == g.n_vertices - 2
    lab = m2.label_of((0, 0))
    assert lab == m2.label_of((2, 1)) == m2.label_of((2, 0))


def test_effective_edges_drop_intra_class_keep_parallel():
    g = build_grid(2, 2)
    # merging each column collapses the vertical edges and leaves the
    # two horizontal edges parallel between the column classes
    m = merge_vertices(g, [("l", [(0, 0), (0, 1)]), ("r", [(1, 0), (1, 1)])])
    lo, hi, orig = m.effective_edges()
    assert len(lo) == 2
    pairs = set(zip(lo.tolist(), hi.tolist()))
    assert len(pairs) == 1


def test_annulus_membership():
    ann = Annulus((0, 0), 2, 4)
    assert ann.contains_vertex((2, 0)) and ann.contains_vertex((4, 4))
    assert not ann.contains_vertex((1, 1)) and not ann.contains_vertex((5, 0))
    assert ann.contains_face((2, 2)) and ann.contains_face((3, -4))
    assert not ann.contains_face((0, 0)) and not ann.contains_face((4, 4))


def test_build_annulus_counts():
    g = build_annulus(1, 2)
    expect = {(x, y) for x in range(-2, 3) for y in range(-2, 3)
              if 1 <= max(abs(x), abs(y)) <= 2}
    assert g.vertex_set() == frozenset(expect)


def test_dual_inner_faces_of_box():
    g = build_box(1)
    dg = dual_of(g)
    inner = [dg.faces[i] for i in np.nonzero(dg.inner)[0]]
    assert sorted(inner) == [(-1, -1), (-1, 0), (0, -1), (0, 0)]


def test_facegrid_path_and_connectivity():
    g = build_grid(2, 2)
    fg = FaceGrid(g)
    p1 = fg.path((0, 0), (0, 1))
    assert p1 == fg.path((0, 0), (0, 1))  # deterministic
    blocked = np.ones(g.n_edges, dtype=bool)
    assert not fg.connected((0, 0), (0, 1), blocked)
    assert fg.connected((-1, 0), (1, 0), blocked)  # around the outside
    assert fg.connected((0, 0), (0, 1), np.zeros(g.n_edges, dtype=bool))


def test_rect_quad_arcs():
    q = build_rect_quad(3, 2)
    assert q.ab[0] == (0, 0) and q.ab[-1] == (3, 0)
    assert q.bc[0] == (3, 0) and q.bc[-1] == (3, 2)
    assert q.cd[0] == (3, 2) and q.cd[-1] == (0, 2)
    assert q.da[0] == (0, 2) and q.da[-1] == (0, 0)
    bset = set(q.domain.boundary_vertices())
    for arc in (q.ab, q.bc, q.cd, q.da):
        assert set(arc) <= bset


def test_empty_domain_rejected():
    with pytest.raises(ValueError):
        domain_from_vertices([])


def test_serialization_round_trip_simple():
    g = merge_vertices(build_grid(3, 3), [("w", [(0, 0), (2, 2)])])
    text = to_text(g)
    g2, quad, kind = from_text(text)
    assert quad is None and kind == "custom"
    assert g2.vertex_list() == g.vertex_list()
    assert g2.edge_list() == g.edge_list()
    assert [sorted(c.members) for c in g2.merges] == \
        [sorted(c.members) for c in g.merges]
    assert to_text(g2) == text


def test_serialization_round_trip_quad():
    q = build_rect_quad(2, 2)
    text = to_text(q)
    g2, q2, kind = from_text(text)
    assert kind == "quad" and isinstance(q2, Quad)
    assert q2.ab == q.ab and q2.bc == q.bc and q2.cd == q.cd and q2.da == q.da
    assert g2.vertex_list() == q.domain.vertex_list()


_cells = st.sets(
    st.tuples(st.integers(0, 3), st.integers(0, 3)), min_size=1, max_size=10)


@settings(max_examples=40, deadline=None)
@given(_cells)
def test_boundary_matches_definition(cells):
    g = domain_from_vertices(sorted(cells))
    vs = g.vertex_set()
    expect = set()
    for (x, y) in vs:
        for dx, dy in ((1, 0), (-1, 0), (0, 1), (0, -1)):
            if (x + dx, y + dy) not in vs:
                expect.add((x, y))
                break
    assert set(g.boundary_vertices()) == expect


@settings(max_examples=40, deadline=None)
@given(_cells)
def test_text_round_trip_random(cells):
    g = domain_from_vertices(sorted(cells))
    g2, _, _ = from_text(to_text(g))
    assert g2.vertex_list() == g.vertex_list()
    assert g2.edge_list() == g.edge_list()


@settings(max_examples=25, deadline=None)
@given(_cells, st.randoms(use_true_random=False))
def test_merge_label_partition(cells, rng):
    vs = sorted(cells)
    g = domain_from_vertices(vs)
    if g.n_vertices < 3:
        return
    picks = rng.sample(vs, k=3)
    m = merge_vertices(g, [(None, picks[:2]), (None, picks[1:])])
    labels = {m.label_of(v) for v in vs}
    assert len(labels) == m.n_classes
    # overlapping classes are absorbed into one
    assert m.label_of(picks[0]) == m.label_of(picks[-1])
