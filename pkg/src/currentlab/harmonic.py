"""Killed-walk partition functions on conductance networks.

A quad carries the mixed-boundary network: conductance 1 on edges
between domain vertices, 2(sqrt(2)-1) on half-edges exiting through the
wired arcs (bc) and (da), and 0 on half-edges exiting elsewhere.
Z[x, y] sums walks from x to y inside the domain, each walk weighted by
the product of its edge conductances over the product of the vertex
totals m_v it visits (both endpoints included).  The matrix of these
values is the inverse of diag(m) - W, so one sparse factorization per
network serves every query; truncated path summation is kept only as a
small-instance oracle.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.sparse import csc_matrix, csr_matrix, diags
from scipy.sparse.csgraph import connected_components
from scipy.sparse.linalg import factorized

from .constants import WIRED_CONDUCTANCE
from .lattice import (Coord, DomainGraph, Quad, domain_from_vertices,
                      dual_of)

RESIDUAL_TOL = 1e-9


@dataclass
class ConductanceNetwork:
    """Per-edge conductances plus per-vertex exit rates on a domain.

    Every lattice neighbor a vertex is missing counts as one exiting
    half-edge with conductance `exit_rate` at that vertex, so
    m_v = exit_rate[v] * (4 - deg v) + sum of incident edge weights.
    """

    base: DomainGraph
    edge_w: np.ndarray
    exit_rate: np.ndarray

    @property
    def totals(self) -> np.ndarray:
        """m_v for every vertex, the sum of the conductances around."""
        if getattr(self, "_totals", None) is None:
            g = self.base
            deg = np.zeros(g.n_vertices, dtype=np.int64)
            np.add.at(deg, g.edge_u, 1)
            np.add.at(deg, g.edge_v, 1)
            m = self.exit_rate * (4 - deg)
            np.add.at(m, g.edge_u, self.edge_w)
            np.add.at(m, g.edge_v, self.edge_w)
            self._totals = m
        return self._totals

    def total_at(self, v: Coord) -> float:
        return float(self.totals[self.base.vertex_index(v)])

    def conductance(self, x: Coord, y: Coord) -> float:
        """w_xy; y may lie outside the domain (an exiting half-edge)."""
        x, y = tuple(x), tuple(y)
        if abs(x[0] - y[0]) + abs(x[1] - y[1]) != 1:
            raise KeyError(f"{x} and {y} are not lattice neighbors")
        if y in self.base.vertex_set():
            if x in self.base.vertex_set():
                return float(self.edge_w[self.base.edge_index(x, y)])
            x, y = y, x
        return float(self.exit_rate[self.base.vertex_index(x)])


def _arc_overlap_check(q: Quad) -> None:
    arcs = [tuple(map(tuple, a)) for a in (q.ab, q.bc, q.cd, q.da)]
    corners = {a[0] for a in arcs} | {a[-1] for a in arcs}
    seen: dict = {}
    for k, arc in enumerate(arcs):
        for v in set(arc):
            if v in seen and seen[v] != k and v not in corners:
                raise ValueError(f"arcs overlap at non-corner vertex {v}")
            seen.setdefault(v, k)


def build_network(q: Quad) -> ConductanceNetwork:
    """Mixed-boundary network of a quad: unit interior edges, wired
    exits of rate 2(sqrt(2)-1) along (bc) and (da), free exits of 0."""
    _arc_overlap_check(q)
    g = q.domain
    rate = np.zeros(g.n_vertices)
    wired = {tuple(v) for v in q.bc} | {tuple(v) for v in q.da}
    if wired:
        idx = g.vertex_indices(np.asarray(sorted(wired), dtype=np.int64))
        rate[idx] = WIRED_CONDUCTANCE
    return ConductanceNetwork(g, np.ones(g.n_edges), rate)


def absorbing_network(g: DomainGraph) -> ConductanceNetwork:
    """Unit conductances with absorption through every missing
    neighbor; m_v = 4 everywhere, so Z is the Green kernel of the
    simple walk killed on leaving the domain, scaled by 1/4."""
    return ConductanceNetwork(g, np.ones(g.n_edges), np.ones(g.n_vertices))


def dual_domain(g: DomainGraph) -> DomainGraph:
    """The inner faces of a domain as a domain of the shifted lattice."""
    dg = dual_of(g)
    faces = dg.face_coords[dg.inner]
    if len(faces) == 0:
        raise ValueError("domain has no inner faces")
    return domain_from_vertices(faces)


def dual_arc_faces(q: Quad, arc: str) -> tuple[Coord, ...]:
    """Inner faces having a corner vertex on the named arc of the quad."""
    dd = dual_domain(q.domain)
    want = {tuple(v) for v in q.arcs()[arc]}
    out = []
    for fx, fy in dd.vertex_list():
        corners = {(fx, fy), (fx + 1, fy), (fx, fy + 1), (fx + 1, fy + 1)}
        if corners & want:
            out.append((int(fx), int(fy)))
    return tuple(out)


def dual_network(q: Quad) -> ConductanceNetwork:
    """Network on the dual domain with the faces along (bc) and (da)
    playing the wired roles."""
    _arc_overlap_check(q)
    dd = dual_domain(q.domain)
    rate = np.zeros(dd.n_vertices)
    wired = set(dual_arc_faces(q, "bc")) | set(dual_arc_faces(q, "da"))
    if wired:
        idx = dd.vertex_indices(np.asarray(sorted(wired), dtype=np.int64))
        rate[idx] = WIRED_CONDUCTANCE
    return ConductanceNetwork(dd, np.ones(dd.n_edges), rate)


# ---------------------------------------------------------------------
# kernels


def _adjacency(g: DomainGraph) -> csr_matrix:
    n = g.n_vertices
    data = np.ones(2 * g.n_edges)
    rows = np.concatenate([g.edge_u, g.edge_v])
    cols = np.concatenate([g.edge_v, g.edge_u])
    return csr_matrix((data, (rows, cols)), shape=(n, n))


class HarmonicKernel:
    """Factorized killed-walk system of one network.

    z(x, y) solves (diag(m) - W) u = delta_x and reads u(y); columns are
    cached per source, and `residual` tracks the worst relative solve
    residual seen.
    """

    def __init__(self, net: ConductanceNetwork):
        g = net.base
        n = g.n_vertices
        ncomp, comp = connected_components(_adjacency(g), directed=False)
        deg = np.zeros(n, dtype=np.int64)
        np.add.at(deg, g.edge_u, 1)
        np.add.at(deg, g.edge_v, 1)
        kill = np.bincount(comp, weights=net.exit_rate * (4 - deg),
                           minlength=ncomp)
        if np.any(kill <= 0):
            raise ValueError("walk not killed: a component has no exit "
                             "conductance")
        m = net.totals
        rows = np.concatenate([g.edge_u, g.edge_v, np.arange(n)])
        cols = np.concatenate([g.edge_v, g.edge_u, np.arange(n)])
        vals = np.concatenate([-net.edge_w, -net.edge_w, m])
        self.network = net
        self.matrix = csc_matrix((vals, (rows, cols)), shape=(n, n))
        self._solve = factorized(self.matrix)
        self._cols: dict[int, np.ndarray] = {}
        self.residual = 0.0

    def _column(self, i: int) -> np.ndarray:
        if i not in self._cols:
            b = np.zeros(self.matrix.shape[0])
            b[i] = 1.0
            u = self._solve(b)
            self.residual = max(self.residual, float(
                np.linalg.norm(self.matrix @ u - b)))
            self._cols[i] = u
        return self._cols[i]

    def z(self, x: Coord, y: Coord) -> float:
        g = self.network.base
        val = self._column(g.vertex_index(x))[g.vertex_index(y)]
        return max(float(val), 0.0)

    def z_sets(self, X, Y) -> float:
        X, Y = list(X), list(Y)
        if not X or not Y:
            return 0.0
        g = self.network.base
        b = np.zeros(self.matrix.shape[0])
        b[g.vertex_indices(np.asarray(Y, dtype=np.int64))] += 1.0
        u = self._solve(b)
        self.residual = max(self.residual, float(
            np.linalg.norm(self.matrix @ u - b) / np.linalg.norm(b)))
        return max(float(
            u[g.vertex_indices(np.asarray(X, dtype=np.int64))].sum()), 0.0)


def kernel_of(net: ConductanceNetwork) -> HarmonicKernel:
    if getattr(net, "_kernel", None) is None:
        net._kernel = HarmonicKernel(net)
    return net._kernel


def z_kernel(net: ConductanceNetwork, x: Coord, y: Coord) -> float:
    """Z[x, y] of the network by sparse solve."""
    return kernel_of(net).z(x, y)


def z_sets(net: ConductanceNetwork, X, Y) -> float:
    """Z[X, Y], the double sum of Z[x, y]; empty sets give 0."""
    return kernel_of(net).z_sets(X, Y)


def z_path_sum(net: ConductanceNetwork, x: Coord, y: Coord,
               max_len: int = 40) -> float:
    """Truncated walk-by-walk evaluation of Z[x, y] (small instances).

    Sums all walks of at most max_len steps by dense transfer matrix;
    the omitted tail is geometric in the walk's survival rate.
    """
    g = net.base
    n = g.n_vertices
    if n > 100:
        raise ValueError("path-sum oracle is for small networks")
    m = net.totals
    P = np.zeros((n, n))
    P[g.edge_u, g.edge_v] = net.edge_w / m[g.edge_u]
    P[g.edge_v, g.edge_u] = net.edge_w / m[g.edge_v]
    f = np.zeros(n)
    f[g.vertex_index(x)] = 1.0
    acc = f.copy()
    for _ in range(max_len):
        f = f @ P
        acc += f
    return float(acc[g.vertex_index(y)] / m[g.vertex_index(y)])


# ---------------------------------------------------------------------
# extremal distance surrogate


def extremal_distance_estimate(q: Quad) -> float:
    """Effective resistance between (ab) and (cd) at unit conductances.

    The arcs act as merged electrodes; arcs sharing a vertex give 0 and
    arcs in different components give math.inf.
    """
    g = q.domain
    A = {tuple(v) for v in q.ab}
    C = {tuple(v) for v in q.cd}
    if A & C:
        return 0.0
    ia = g.vertex_indices(np.asarray(sorted(A), dtype=np.int64))
    ic = g.vertex_indices(np.asarray(sorted(C), dtype=np.int64))
    adj = _adjacency(g)
    ncomp, comp = connected_components(adj, directed=False)
    if not set(comp[ia]) & set(comp[ic]):
        return math.inf

    n = g.n_vertices
    in_a = np.zeros(n, dtype=bool)
    in_a[ia] = True
    in_c = np.zeros(n, dtype=bool)
    in_c[ic] = True
    live = np.isin(comp, np.unique(np.concatenate([comp[ia], comp[ic]])))
    u = np.where(in_a, 1.0, 0.0)
    free = live & ~in_a & ~in_c
    if np.any(free):
        deg = np.asarray(adj.sum(axis=1)).ravel()
        idx = np.nonzero(free)[0]
        sub = adj[idx][:, idx]
        lap = diags(deg[idx], format="csc") - csc_matrix(sub)
        rhs = np.asarray(adj[idx][:, np.nonzero(in_a)[0]].sum(
            axis=1)).ravel()
        u[idx] = factorized(lap)(rhs)

    # orient every electrode edge out of (ab); interior and A-A edges
    # contribute nothing
    drop = u[g.edge_u] - u[g.edge_v]
    touch_a = in_a[g.edge_u].astype(int) - in_a[g.edge_v].astype(int)
    current = float(np.sum(np.where(touch_a > 0, drop,
                                    np.where(touch_a < 0, -drop, 0.0))))
    if current <= 0:
        return math.inf
    return 1.0 / current
