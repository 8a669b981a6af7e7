"""Conductance networks and killed-walk kernels: closed forms,
symmetry, path-sum consistency, duality, and resistance estimates."""

import math

import numpy as np
import pytest

from currentlab import harmonic as H
from currentlab.harmonic import ConductanceNetwork
from currentlab.lattice import Quad, build_box, build_rect_quad, domain_from_vertices

WIRED = 2.0 * (math.sqrt(2.0) - 1.0)


def single_vertex_quad():
    g = domain_from_vertices([(0, 0)])
    arc = ((0, 0),)
    return Quad(g, arc, arc, arc, arc)


def test_total_weight_examples():
    net = H.build_network(build_rect_quad(2, 2))
    assert net.total_at((1, 1)) == pytest.approx(4.0, abs=1e-12)
    assert net.total_at((2, 1)) == pytest.approx(3.0 + WIRED, abs=1e-12)
    nv = H.build_network(single_vertex_quad())
    assert nv.total_at((0, 0)) == pytest.approx(4 * WIRED, abs=1e-12)


def test_conductance_lookup():
    net = H.build_network(build_rect_quad(6, 2))
    assert net.conductance((0, 0), (1, 0)) == 1.0
    assert net.conductance((6, 1), (7, 1)) == pytest.approx(WIRED)
    assert net.conductance((3, 0), (3, -1)) == 0.0  # free side
    with pytest.raises(KeyError):
        net.conductance((0, 0), (2, 0))


def test_arc_overlap_rejected():
    g = build_rect_quad(2, 2).domain
    bad = Quad(g, ((0, 0), (1, 0), (2, 0)), ((2, 0), (2, 1), (2, 2)),
               ((2, 2), (1, 2), (0, 2)),
               ((0, 2), (0, 1), (0, 0), (1, 0), (2, 0)))
    with pytest.raises(ValueError, match="overlap"):
        H.build_network(bad)


def test_single_vertex_closed_form():
    net = H.build_network(single_vertex_quad())
    assert H.z_kernel(net, (0, 0), (0, 0)) == pytest.approx(
        1.0 / (4 * WIRED), abs=1e-12)


def test_walk_not_killed():
    g = build_rect_quad(2, 2).domain
    bad = ConductanceNetwork(g, np.ones(g.n_edges), np.zeros(g.n_vertices))
    with pytest.raises(ValueError, match="walk not killed"):
        H.z_kernel(bad, (0, 0), (1, 1))


def test_kernel_symmetric_and_nonnegative():
    # the walk weight reverses edge by edge, so Z is a symmetric kernel
    # and the visit counts m_y Z[x,y] satisfy detailed balance
    for q in (build_rect_quad(2, 2), build_rect_quad(6, 2)):
        net = H.build_network(q)
        vs = q.domain.vertex_list()
        m = {v: net.total_at(v) for v in vs}
        for x in vs[:: max(1, len(vs) // 6)]:
            for y in vs:
                zxy = H.z_kernel(net, x, y)
                zyx = H.z_kernel(net, y, x)
                assert zxy >= 0.0
                assert abs(zxy - zyx) <= 1e-9
                assert abs(m[x] * (m[y] * zxy) - m[y] * (m[x] * zyx)) <= 1e-9


def test_solver_matches_path_sum():
    # truncation tail is geometric with the walk survival rate, so the
    # depth is chosen per quad to push it below the tolerance
    cases = [(build_rect_quad(1, 1), 40), (build_rect_quad(2, 1), 80),
             (build_rect_quad(2, 2), 120)]
    for q, depth in cases:
        net = H.build_network(q)
        vs = q.domain.vertex_list()
        for x in vs:
            for y in vs:
                direct = H.z_kernel(net, x, y)
                summed = H.z_path_sum(net, x, y, max_len=depth)
                assert abs(direct - summed) <= 1e-6


def test_path_sum_truncation_decays():
    net = H.build_network(build_rect_quad(2, 2))
    z = H.z_kernel(net, (0, 0), (1, 2))
    e40 = abs(H.z_path_sum(net, (0, 0), (1, 2), 40) - z)
    e80 = abs(H.z_path_sum(net, (0, 0), (1, 2), 80) - z)
    assert e80 < e40 / 100


def test_z_sets_trivial_and_decay():
    q = build_rect_quad(12, 2)
    net = H.build_network(q)
    assert H.z_sets(net, [], [(0, 0)]) == 0.0
    assert H.z_sets(net, [(0, 0)], []) == 0.0
    for v in ((0, 0), (6, 1), (12, 2)):
        assert H.z_kernel(net, v, v) >= 1.0 / net.total_at(v) - 1e-12
    vals = [H.z_sets(net, [(0, 1)], [(k, 1)]) for k in (3, 6, 9, 12)]
    assert all(a > b for a, b in zip(vals, vals[1:]))


def test_z_sets_is_double_sum():
    q = build_rect_quad(3, 2)
    net = H.build_network(q)
    X = [(0, 0), (1, 1)]
    Y = [(3, 2), (2, 0)]
    total = sum(H.z_kernel(net, x, y) for x in X for y in Y)
    assert H.z_sets(net, X, Y) == pytest.approx(total, rel=1e-10)


def test_solver_residual_small():
    net = H.build_network(build_rect_quad(8, 8))
    H.z_sets(net, [(0, 0), (4, 4)], [(8, 8)])
    assert H.kernel_of(net).residual <= 1e-9


def test_dual_single_face_closed_form():
    nd = H.dual_network(build_rect_quad(1, 1))
    assert nd.base.n_vertices == 1
    assert H.z_kernel(nd, (0, 0), (0, 0)) == pytest.approx(
        1.0 / (4 * WIRED), abs=1e-12)


def test_dual_of_faceless_quad_raises():
    with pytest.raises(ValueError, match="no inner faces"):
        H.dual_network(single_vertex_quad())


def test_self_dual_square_matches():
    # the dual of the (n+1)-square is the n-square network shifted, so
    # matched sizes agree
    for n in (6, 10):
        qp = build_rect_quad(n, n)
        qd = build_rect_quad(n + 1, n + 1)
        zp = H.z_sets(H.build_network(qp), qp.ab, qp.cd)
        zd = H.z_sets(H.dual_network(qd), H.dual_arc_faces(qd, "ab"),
                      H.dual_arc_faces(qd, "cd"))
        assert abs(zp - zd) / zp < 0.05


def test_absorbing_network_and_dual_domain():
    g = build_box(3)
    net = H.absorbing_network(g)
    assert np.allclose(net.totals, 4.0)
    z_near = H.z_kernel(net, (0, 0), (1, 0))
    z_far = H.z_kernel(net, (0, 0), (3, 0))
    assert z_near > z_far > 0
    dd = H.dual_domain(g)
    assert dd.n_vertices == 36  # 6x6 inner faces
    nx = H.absorbing_network(dd)
    assert H.z_kernel(nx, (0, 0), (0, 0)) >= 0.25


def test_extremal_distance_square_and_strip():
    n = 8
    r_sq = H.extremal_distance_estimate(build_rect_quad(n, n))
    assert r_sq == pytest.approx(n / (n + 1), abs=1e-8)
    assert abs(r_sq - 1.0) <= 2.0 / n
    r_tall = H.extremal_distance_estimate(build_rect_quad(n, 2 * n))
    assert r_tall == pytest.approx(2 * n / (n + 1), abs=1e-8)
    assert abs(r_tall - 2.0) <= 4.0 / n


def test_extremal_distance_sentinels():
    two = domain_from_vertices([(0, 0), (0, 1), (2, 0), (2, 1)])
    qd = Quad(two, ((0, 0), (0, 1)), ((0, 1),), ((2, 0), (2, 1)), ((0, 0),))
    assert H.extremal_distance_estimate(qd) == math.inf
    sv = single_vertex_quad()
    assert H.extremal_distance_estimate(sv) == 0.0


def test_extremal_distance_monotone_under_inclusion():
    # widening the quad adds parallel paths and lowers the resistance
    r1 = H.extremal_distance_estimate(build_rect_quad(4, 6))
    r2 = H.extremal_distance_estimate(build_rect_quad(8, 6))
    assert r2 < r1
