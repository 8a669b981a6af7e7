"""Exact-enumeration oracles: correlations, switching, flux, FK."""

import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from currentlab import oracle as oc
from currentlab.constants import P_C, Q_EVEN, Q_EVEN2, TANH_BC
from currentlab.lattice import build_grid, domain_from_vertices, merge_vertices

T = TANH_BC


def _edge():
    return domain_from_vertices([(0, 0), (1, 0)])


def test_constants_relations():
    assert abs(T - (math.sqrt(2) - 1)) < 1e-15
    assert abs(Q_EVEN - (1 - math.sqrt(1 - T * T))) < 1e-15
    # both-even positivity rate equals t^2; the flux-parity conditional
    # being exactly 1/2 hinges on this
    assert abs(Q_EVEN2 - T * T) < 1e-15
    assert abs(P_C - (2 - math.sqrt(2))) < 1e-15


def test_single_edge_correlation():
    g = _edge()
    assert abs(oc.correlation_exact(g, [(0, 0), (1, 0)]) - T) < 1e-12
    assert abs(oc.spin_correlation_bruteforce(g, [(0, 0), (1, 0)]) - T) < 1e-12


def test_four_cycle_adjacent_correlation():
    g = build_grid(2, 2)
    expect = (T + T ** 3) / (1 + T ** 4)
    assert abs(oc.correlation_exact(g, [(0, 0), (1, 0)]) - expect) < 1e-12


def test_parity_route_matches_spin_route():
    corpus = [
        (build_grid(2, 2), [(0, 0), (1, 1)]),
        (build_grid(3, 2), [(0, 0), (2, 1)]),
        (build_grid(3, 3), [(0, 0), (2, 2)]),
        (build_grid(3, 3), [(0, 0), (1, 0), (2, 2), (0, 2)]),
    ]
    for g, b in corpus:
        a = oc.correlation_exact(g, b)
        s = oc.spin_correlation_bruteforce(g, b)
        assert abs(a - s) < 1e-12, (g, b)


def test_merged_graph_correlation_matches_spin_route():
    g = merge_vertices(build_grid(3, 2), [(None, [(0, 0), (0, 1)])])
    lab = g.label_of((0, 0))
    a = oc.correlation_exact(g, [lab, (2, 0)])
    s = oc.spin_correlation_bruteforce(g, [lab, (2, 0)])
    assert abs(a - s) < 1e-12


def test_odd_sources_rejected():
    with pytest.raises(ValueError):
        oc.correlation_exact(_edge(), [(0, 0)])


def test_unrealizable_sources_rejected():
    g = domain_from_vertices([(0, 0), (1, 0), (5, 5), (6, 5)])
    with pytest.raises(ValueError):
        oc.correlation_exact(g, [(0, 0), (5, 5)])


def test_single_edge_positivity_marginal():
    g = _edge()
    m0 = oc.edge_positive_marginals(g, ())
    assert abs(m0[0] - Q_EVEN) < 1e-12
    m1 = oc.edge_positive_marginals(g, [(0, 0), (1, 0)])
    assert abs(m1[0] - 1.0) < 1e-12  # odd edge is always positive


def test_trace_distribution_consistency():
    g = build_grid(2, 2)
    tab = oc.trace_distribution_exact(g, ())
    assert abs(tab.prob.sum() - 1.0) < 1e-12
    # positivity marginal per edge agrees with the direct computation
    marg = oc.edge_positive_marginals(g, ())
    for e in range(4):
        p = tab.probability(lambda pm, vm, e=e: bool((vm >> e) & 1))
        assert abs(p - marg[e]) < 1e-12
    # parity marginal agrees with the parity table ratio
    pt = oc.enumerate_parity(g, ())
    w_full = T ** 4 / pt.total()
    p_full = tab.probability(lambda pm, vm: pm == 0b1111)
    assert abs(p_full - w_full) < 1e-12


def test_parity_table_poly_single_edge():
    pt = oc.enumerate_parity(_edge(), [(0, 0), (1, 0)])
    assert pt.poly().tolist() == [0, 1]
    pt0 = oc.enumerate_parity(_edge(), ())
    assert pt0.poly().tolist() == [1, 0]


def test_switching_lemma_float_corpus():
    g4 = build_grid(2, 2)
    g6 = build_grid(3, 2)
    edge = _edge()
    cases = [
        (g4, g4, [(0, 0), (1, 0)], [(0, 0), (1, 0)], oc.Functional.one()),
        (g4, g4, [(0, 0), (1, 1)], [(0, 1), (1, 0)], oc.Functional.one()),
        (g4, g4, [(0, 0), (1, 0)], [(0, 1), (1, 1)],
         oc.Functional.cluster_count()),
        (g4, g4, [(0, 0), (1, 1)], [(0, 0), (1, 1)],
         oc.Functional.edge_positive(((0, 0), (1, 0)))),
        (g6, g6, [(0, 0), (2, 1)], [(1, 0), (1, 1)], oc.Functional.one()),
        (g6, g6, [(0, 0), (1, 0), (0, 1), (1, 1)], [(0, 0), (2, 0)],
         oc.Functional.cluster_count()),
        (g4, edge, [(0, 0), (1, 0)], [(0, 0), (1, 1)], oc.Functional.one()),
        (g6, g4, [(0, 0), (1, 1)], [(0, 0), (2, 0)],
         oc.Functional.cluster_count()),
    ]
    for g, h, a, b, f in cases:
        rep = oc.verify_switching_lemma(g, h, a, b, f)
        assert rep.residual < 1e-10, (a, b, f.name, rep)


def test_switching_lemma_exact_ring():
    g4 = build_grid(2, 2)
    rep = oc.verify_switching_lemma(
        g4, g4, [(0, 0), (1, 0)], [(0, 0), (1, 0)], oc.Functional.one(),
        mode="exact")
    assert rep.exact_equal and rep.residual == 0.0
    h = _edge()
    rep2 = oc.verify_switching_lemma(
        g4, h, [(0, 0), (1, 0)], [(0, 1), (1, 1)], oc.Functional.one(),
        mode="exact")
    assert rep2.exact_equal
    rep3 = oc.verify_switching_lemma(
        g4, g4, [(0, 0), (1, 1)], [(0, 0), (1, 1)],
        oc.Functional.cluster_count(), mode="exact")
    assert rep3.exact_equal


def test_switching_lemma_h_not_subgraph_rejected():
    g = build_grid(2, 2)
    h = domain_from_vertices([(0, 0), (1, 0), (2, 0)])
    with pytest.raises(ValueError):
        oc.verify_switching_lemma(g, h, [(0, 0), (2, 0)], [(0, 0), (1, 0)],
                                  oc.Functional.one())


def test_switching_principle_doubled_path():
    mg = oc.SiteGraph.from_pairs(
        ["u", "m", "v"], [("u", "m"), ("u", "m"), ("m", "v"), ("m", "v")])
    rep = oc.verify_switching_principle(mg, ["u", "v"],
                                        lambda m: float(m.bit_count()))
    assert rep.residual < 1e-12
    # canonical K is the smallest mask with the right sources
    k = rep.k_mask
    assert k == oc.canonical_k(mg, ["u", "v"])
    groups = oc._parity_groups(mg, 20)
    ma = mg.source_mask(["u", "v"])
    assert k == int(groups[ma][0].min())


def test_switching_principle_unswitchable():
    mg = oc.SiteGraph.from_pairs(["u", "v", "w"], [("u", "v")])
    with pytest.raises(ValueError, match="unswitchable"):
        oc.canonical_k(mg, ["u", "w"])


@settings(max_examples=30, deadline=None)
@given(st.lists(st.tuples(st.integers(0, 3), st.integers(0, 3))
                .filter(lambda p: p[0] != p[1]),
                min_size=1, max_size=6),
       st.integers(0, 15))
def test_switching_principle_random_multigraphs(pairs, abits):
    sites = list(range(4))
    mg = oc.SiteGraph.from_pairs(sites, pairs)
    a = [s for s in sites if (abits >> s) & 1]
    if len(a) % 2:
        a = a[:-1]
    groups = oc._parity_groups(mg, 20)
    ma = mg.source_mask(a)
    if ma not in groups:
        with pytest.raises(ValueError):
            oc.canonical_k(mg, a)
        return
    rep = oc.verify_switching_principle(
        mg, a, lambda m: float((m.bit_count() % 3) + 1))
    assert rep.residual < 1e-12


def test_flux_half_four_cycle():
    g = build_grid(2, 2)
    rep = oc.verify_flux_half(g, (0, 0), (0, 1))
    assert rep.max_residual < 1e-10
    assert rep.qualifying_classes == 2


def test_flux_half_larger():
    g = build_grid(3, 2)
    rep = oc.verify_flux_half(g, (0, 0), (0, -1))
    assert rep.max_residual < 1e-10
    assert rep.qualifying_classes > 0
    rep2 = oc.verify_flux_half(g, (0, 0), (1, 0))
    assert rep2.max_residual < 1e-10


def test_flux_path_independence():
    # concatenation through an intermediate face changes the route; the
    # flux parity of any sourceless configuration must not change
    g = build_grid(3, 3)
    sg = oc.SiteGraph.from_domain(g)
    groups = oc._parity_groups(sg, 24)
    faces = [(0, 0), (1, 1), (-1, -1), (0, 2)]
    from currentlab.lattice import FaceGrid
    fg = FaceGrid(g)
    for u in faces:
        for v in faces:
            direct = fg.path(u, v)
            via = fg.path(u, (2, -1)) + fg.path((2, -1), v)
            for m in groups[0][0][:40]:
                assert oc.flux_parity(int(m), direct) == \
                    oc.flux_parity(int(m), via)


def test_fk_event_probability_normalizes():
    g = build_grid(2, 2)
    assert abs(oc.fk_event_probability(g, lambda m: 1.0) - 1.0) < 1e-12
    marg = oc.fk_edge_marginals(g)
    assert np.all(marg > 0) and np.all(marg < 1)


def test_fk_coupling_exact():
    # positivity + Bernoulli(1 - sqrt(1 - p_c)) sprinkle reproduces the
    # free random cluster measure exactly
    assert oc.fk_coupling_residual(build_grid(2, 2)) < 1e-12
    assert oc.fk_coupling_residual(build_grid(3, 2)) < 1e-12


def test_fk_two_point_equals_correlation():
    g = build_grid(3, 2)
    sg = oc.SiteGraph.from_domain(g)
    iu, iv = sg.site_index((0, 0)), sg.site_index((2, 1))

    def conn(m):
        roots = oc._components(sg, m)
        return 1.0 if roots[iu] == roots[iv] else 0.0

    p = oc.fk_event_probability(sg, conn)
    c = oc.correlation_exact(g, [(0, 0), (2, 1)])
    assert abs(p - c) < 1e-12


def test_fb_identity_on_corpus():
    corpus = [
        (_edge(), [(0, 0), (1, 0)]),
        (build_grid(2, 2), [(0, 0), (1, 1)]),
        (build_grid(3, 2), [(0, 0), (2, 1)]),
        (build_grid(3, 2), [(0, 0), (1, 0), (2, 0), (0, 1)]),
    ]
    for g, b in corpus:
        assert oc.fb_identity_residual(g, b) < 1e-10, b


def test_double_connectivity_equals_squared_correlation():
    for g in (build_grid(2, 2), build_grid(3, 2)):
        u, v = (0, 0), (1, 1)
        p = oc.double_connectivity_exact(g, u, v)
        c = oc.correlation_exact(g, [u, v])
        assert abs(p - c * c) < 1e-12
    # also on a merged graph
    m = merge_vertices(build_grid(3, 2), [(None, [(0, 0), (0, 1)])])
    lab = m.label_of((0, 0))
    p = oc.double_connectivity_exact(m, lab, (2, 0))
    c = oc.correlation_exact(m, [lab, (2, 0)])
    assert abs(p - c * c) < 1e-12


@pytest.mark.parametrize("beta", [0.0, 0.4406867935097715, 1.0])
def test_parity_reduction_against_series(beta):
    d = oc.validate_parity_reduction(beta)
    assert d["per_parity_max_residual"] < 1e-10
    assert d["factorization_max_residual"] < 1e-10
    assert d["q_even_residual"] < 1e-6


def test_connected_induced_subgraph_corpus():
    subs = oc.connected_induced_subgraphs(build_grid(2, 2))
    # 4 singletons + 4 edges + 4 L-shaped triples + the full square
    assert len(subs) == 13


def test_even_subsets():
    out = oc.even_subsets([(0, 0), (1, 0), (0, 1), (1, 1)], max_size=4)
    assert len(out) == 1 + 6 + 1
    assert frozenset() in out


@settings(max_examples=20, deadline=None)
@given(st.integers(0, 2), st.integers(0, 2))
def test_duplication_increases_correlation(i, j):
    # second-Griffiths style monotonicity: doubling a coupling cannot
    # decrease a two-point function
    g = build_grid(3, 2)
    sg = oc.SiteGraph.from_domain(g)
    slot = (i * 2 + j) % sg.n_edges
    doubled = oc.SiteGraph(
        sg.sites, sg.slots + (sg.slots[slot],), sg.keys + (("dup", slot),))
    b = [(0, 0), (2, 1)]
    assert oc.correlation_exact(doubled, b) >= \
        oc.correlation_exact(sg, b) - 1e-12
