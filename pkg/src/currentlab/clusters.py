"""Event detectors on sampled current traces.

Every detector reads a trace (parity / positivity bits on the edges of
a DomainGraph) and reports a geometric event: annulus crossings by
clusters of positive edges, holes of the dual between them, pivotal
two-crossing events refined by flux parity, separation of boundary
four-arm points, and coarse boundary-box counts.

Cluster and hole labels are canonical (minimum member index), so every
labeling is independent of edge iteration order.  All routines are pure
functions of immutable samples.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import _kernels
from .lattice import (Annulus, Coord, DomainGraph, DualGraph, Quad,
                      boundary_neighborhood, dual_of)


def _dual_cached(g: DomainGraph) -> DualGraph:
    if "dualgraph" not in g._cache:
        g._cache["dualgraph"] = dual_of(g)
    return g._cache["dualgraph"]


def _chebyshev(g: DomainGraph, center: Coord) -> np.ndarray:
    cx, cy = int(center[0]), int(center[1])
    return np.maximum(np.abs(g.verts[:, 0] - cx), np.abs(g.verts[:, 1] - cy))


def labels_for_edges(g: DomainGraph, keep: np.ndarray) -> np.ndarray:
    """Canonical component label per vertex using the flagged edges."""
    parent = np.empty(g.n_vertices, dtype=np.int64)
    sel = np.nonzero(keep)[0]
    _kernels.union_labels(g.n_vertices, g.edge_u[sel].astype(np.int64),
                          g.edge_v[sel].astype(np.int64), parent)
    return parent


def path_flux(bits: np.ndarray, path_edges) -> bool:
    """Parity (True = odd) of the bit sum over the given edge indices."""
    idx = np.asarray(path_edges, dtype=np.int64)
    if idx.size == 0:
        return False
    return bool(np.bitwise_xor.reduce(np.asarray(bits, dtype=bool)[idx]))


# ---------------------------------------------------------------------
# primal clusters


@dataclass
class ClusterLabeling:
    """Cluster id per vertex of the sampled graph, -1 outside the region.

    Two in-region vertices share an id iff a path of positive edges of
    the region joins them; the id is the minimum member vertex index.
    """

    graph: DomainGraph
    in_region: np.ndarray
    label: np.ndarray

    def label_at(self, v: Coord) -> int:
        return int(self.label[self.graph.vertex_index(v)])

    def labels_in(self, vmask: np.ndarray) -> np.ndarray:
        """Sorted distinct ids among region vertices flagged by vmask."""
        return np.unique(self.label[vmask & self.in_region])

    def crossing_count(self, mask_a: np.ndarray, mask_b: np.ndarray) -> int:
        """Distinct clusters having a vertex in both flagged sets."""
        a = self.labels_in(mask_a)
        b = self.labels_in(mask_b)
        return int(len(np.intersect1d(a, b, assume_unique=True)))

    def connects(self, mask_a: np.ndarray, mask_b: np.ndarray) -> bool:
        return self.crossing_count(mask_a, mask_b) > 0


def _mask_labeling(g: DomainGraph, positive: np.ndarray,
                   vmask: np.ndarray) -> ClusterLabeling:
    """Labeling over the subgraph induced by a vertex mask."""
    keep = positive & vmask[g.edge_u] & vmask[g.edge_v]
    label = labels_for_edges(g, keep)
    label[~vmask] = -1
    return ClusterLabeling(g, vmask, label)


def label_clusters(dc, region: DomainGraph) -> ClusterLabeling:
    """Positive-edge clusters restricted to the edges of `region`.

    `region` must be a subgraph of the sampled domain; its own edge set
    defines the restriction, so a sparser region graph is honored.
    """
    g = dc.graph
    try:
        vmap = g.vertex_indices(region.verts)
        if region.n_edges:
            pairs = np.stack([region.verts[region.edge_u],
                              region.verts[region.edge_v]], axis=1)
            emap = g.edge_indices(pairs)
        else:
            emap = np.empty(0, dtype=np.int64)
    except KeyError as exc:
        raise ValueError(f"region exceeds the sampled domain: {exc}") from exc
    in_region = np.zeros(g.n_vertices, dtype=bool)
    in_region[vmap] = True
    positive = np.asarray(dc.positive, dtype=bool)
    keep = np.zeros(g.n_edges, dtype=bool)
    keep[emap[positive[emap]]] = True
    label = labels_for_edges(g, keep)
    label[~in_region] = -1
    return ClusterLabeling(g, in_region, label)


# ---------------------------------------------------------------------
# annulus crossings


@dataclass(frozen=True)
class CrossingReport:
    """Counts of annulus-crossing clusters and crossing holes."""

    annulus: Annulus
    k_clusters: int
    k_holes: int

    def a_2k(self, k: int) -> bool:
        """k distinct crossing clusters exist."""
        if k < 1:
            raise ValueError("k must be >= 1")
        return self.k_clusters >= k


def _annulus_masks(g: DomainGraph, ann: Annulus):
    """(band, inner ring, outer ring) vertex masks; checks containment."""
    d = _chebyshev(g, ann.center)
    band = (d >= ann.r) & (d <= ann.R)
    want = (2 * ann.R + 1) ** 2 - (2 * ann.r - 1) ** 2
    if int(band.sum()) != want:
        raise ValueError(
            f"Ann({ann.r},{ann.R}) at {tuple(ann.center)} exceeds the domain")
    return band, d == ann.r, d == ann.R


def count_annulus_crossings(dc, ann: Annulus) -> CrossingReport:
    """Clusters of the annulus restriction joining both rings, plus the
    crossing-hole count of the dual band."""
    g = dc.graph
    band, ring_in, ring_out = _annulus_masks(g, ann)
    lab = _mask_labeling(g, np.asarray(dc.positive, dtype=bool), band)
    holes = label_holes(dc, ann)
    return CrossingReport(ann, lab.crossing_count(ring_in, ring_out),
                          holes.n_crossing)


def detect_a4_square(dc, x: Coord, r: int, R: int) -> bool:
    """Two distinct clusters of the box restriction at x, each touching
    the inner box and the outer ring."""
    if not 1 <= r <= R:
        raise ValueError("need 1 <= r <= R")
    g = dc.graph
    d = _chebyshev(g, x)
    box = d <= R
    if int(box.sum()) != (2 * R + 1) ** 2:
        raise ValueError(f"Lambda_{R} at {tuple(x)} exceeds the domain")
    lab = _mask_labeling(g, np.asarray(dc.positive, dtype=bool), box)
    return lab.crossing_count(d <= r, d == R) >= 2


def count_b2k_odd(trace, ann: Annulus) -> int:
    """Distinct odd-parity clusters crossing the annulus.

    Reads the single-current trace fields `graph` and `eta`; endpoint
    consistency (sources outside the band) is the caller's business.
    """
    g = trace.graph
    band, ring_in, ring_out = _annulus_masks(g, ann)
    lab = _mask_labeling(g, np.asarray(trace.eta, dtype=bool), band)
    return lab.crossing_count(ring_in, ring_out)


# ---------------------------------------------------------------------
# dual holes


@dataclass
class HoleLabeling:
    """Hole id per dual face of the annulus band, -1 outside.

    A hole is a set of faces joined through dual edges whose primal
    edge carries zero aggregate; crossing holes touch both the inner
    and the outer face ring of the band.
    """

    dual: DualGraph
    in_region: np.ndarray
    label: np.ndarray
    crossing: np.ndarray

    @property
    def n_holes(self) -> int:
        return int(len(np.unique(self.label[self.in_region])))

    @property
    def n_crossing(self) -> int:
        return int(len(self.crossing))

    def label_at(self, f: Coord) -> int:
        return int(self.label[self.dual.face_index(tuple(f))])

    def faces_of(self, hole_id: int) -> list[Coord]:
        fl = self.dual.faces
        return [fl[i] for i in np.nonzero(self.label == hole_id)[0]]


def _resolve_domain(dc, domain: DomainGraph | None):
    """(graph, positivity per its edge) for an optional explicit domain."""
    if domain is None or domain is dc.graph:
        return dc.graph, np.asarray(dc.positive, dtype=bool)
    try:
        pairs = np.stack([domain.verts[domain.edge_u],
                          domain.verts[domain.edge_v]], axis=1)
        emap = dc.graph.edge_indices(pairs)
    except KeyError as exc:
        raise ValueError(f"domain exceeds the sampled graph: {exc}") from exc
    return domain, np.asarray(dc.positive, dtype=bool)[emap]


def _zero_labels_cached(dc, g: DomainGraph, positive: np.ndarray) -> np.ndarray:
    """Global component label per dual face over zero-aggregate edges,
    with all faces outside the domain identified; memoized on the trace
    since the labels do not depend on the queried annulus."""
    cache = getattr(dc, "_zero_label_cache", None)
    if cache is not None and cache[0] is g:
        return cache[1]
    dg = _dual_cached(g)
    sel = np.nonzero(~positive)[0]
    fa = dg.edge_face_a[sel].astype(np.int64)
    fb = dg.edge_face_b[sel].astype(np.int64)
    outer = np.nonzero(~dg.inner)[0].astype(np.int64)
    if len(outer) > 1:
        fa = np.concatenate([fa, outer[1:]])
        fb = np.concatenate([fb, np.full(len(outer) - 1, outer[0])])
    label = np.empty(dg.n_faces, dtype=np.int64)
    _kernels.union_labels(dg.n_faces, fa, fb, label)
    try:
        dc._zero_label_cache = (g, label)
    except (AttributeError, TypeError):
        pass
    return label


def label_holes(dc, ann: Annulus, domain: DomainGraph | None = None
                ) -> HoleLabeling:
    """Face components of zero-aggregate dual edges, traced on the band.

    Components are taken in the dual of the whole sampled domain, with
    every face outside the domain identified into one vacant region (a
    puncture-free domain's complement is one piece of the plane).  A
    hole is the band trace of such a component; two band traces joined
    by a zero-aggregate detour outside the band are therefore one hole,
    which is what makes the positive edges separate distinct holes.
    """
    g, positive = _resolve_domain(dc, domain)
    dg = _dual_cached(g)
    cx, cy = int(ann.center[0]), int(ann.center[1])
    # twice the face-center distance, integer exact
    fd2 = np.maximum(np.abs(2 * dg.face_coords[:, 0] + 1 - 2 * cx),
                     np.abs(2 * dg.face_coords[:, 1] + 1 - 2 * cy))
    band = (fd2 >= 2 * ann.r - 1) & (fd2 <= 2 * ann.R - 1)
    want = (2 * ann.R) ** 2 - (2 * ann.r - 2) ** 2
    if int(band.sum()) != want or bool(np.any(band & ~dg.inner)):
        raise ValueError(
            f"face band of Ann({ann.r},{ann.R}) at {(cx, cy)} is not "
            "interior to the domain")
    label = _zero_labels_cached(dc, g, positive).copy()
    label[~band] = -1
    ring_in = band & (fd2 == 2 * ann.r - 1)
    ring_out = band & (fd2 == 2 * ann.R - 1)
    crossing = np.intersect1d(np.unique(label[ring_in]),
                              np.unique(label[ring_out]), assume_unique=True)
    return HoleLabeling(dg, band, label, crossing)


# ---------------------------------------------------------------------
# dual paths between holes


def _face_csr(holes: HoleLabeling):
    """CSR adjacency of band faces, rows sorted by neighbor face id."""
    csr = getattr(holes, "_csr", None)
    if csr is None:
        dg = holes.dual
        ok = holes.in_region[dg.edge_face_a] & holes.in_region[dg.edge_face_b]
        sel = np.nonzero(ok)[0]
        fa = dg.edge_face_a[sel].astype(np.int64)
        fb = dg.edge_face_b[sel].astype(np.int64)
        src = np.concatenate([fa, fb])
        dst = np.concatenate([fb, fa])
        eid = np.concatenate([sel, sel]).astype(np.int64)
        order = np.lexsort((dst, src))
        n = dg.n_faces
        indptr = np.zeros(n + 1, dtype=np.int64)
        np.cumsum(np.bincount(src, minlength=n), out=indptr[1:])
        csr = (indptr, dst[order], eid[order])
        holes._csr = csr
    return csr


def _hole_bfs(holes: HoleLabeling, src_label: int, reverse: bool = False):
    """Deterministic BFS over band faces from one hole's face set."""
    indptr, nbr, eid = _face_csr(holes)
    n = holes.dual.n_faces
    dist = np.full(n, -1, dtype=np.int64)
    prev_face = np.full(n, -1, dtype=np.int64)
    prev_edge = np.full(n, -1, dtype=np.int64)
    queue = np.empty(n, dtype=np.int64)
    seeds = np.nonzero(holes.label == src_label)[0].astype(np.int64)
    if reverse:
        seeds = seeds[::-1].copy()
    _kernels.bfs_tree(indptr, nbr, eid, seeds, dist, prev_face, prev_edge,
                      queue, reverse)
    return dist, prev_face, prev_edge


def hole_path(holes: HoleLabeling, hole_a: int, hole_b: int,
              reverse: bool = False) -> list[int]:
    """Edge indices crossed by a shortest dual path between two holes.

    Ties are broken by face id (ascending, or descending with
    `reverse`); flipping the flag yields an independent path choice for
    path-invariance checks.
    """
    if hole_a == hole_b:
        raise ValueError("need two distinct holes")
    dist, prev_face, prev_edge = _hole_bfs(holes, hole_a, reverse)
    sel = np.nonzero((holes.label == hole_b) & (dist >= 0))[0]
    if len(sel) == 0:
        raise ValueError("holes not joined within the band")
    dmin = dist[sel].min()
    cands = sel[dist[sel] == dmin]
    f = int(cands.max() if reverse else cands.min())
    out = []
    while prev_edge[f] >= 0:
        out.append(int(prev_edge[f]))
        f = int(prev_face[f])
    out.reverse()
    return out


def _pairs_by_distance(holes: HoleLabeling) -> list[tuple[int, int, int]]:
    """Crossing-hole pairs (a, b, dist) ordered closest first."""
    labs = [int(v) for v in holes.crossing]
    out = []
    for i, la in enumerate(labs):
        dist, _, _ = _hole_bfs(holes, la)
        for lb in labs[i + 1:]:
            dsel = dist[holes.label == lb]
            dsel = dsel[dsel >= 0]
            if len(dsel):
                out.append((la, lb, int(dsel.min())))
    out.sort(key=lambda t: (t[2], t[0], t[1]))
    return out


@dataclass(frozen=True)
class HoleCrossingEvent:
    """Outcome of the two-crossing-hole test with flux refinement.

    verdict is "none" when fewer than two crossing holes exist or no
    pair of them is joined by a dual path of even aggregate flux;
    otherwise the parity of the first current's flux across the
    deciding path, "even" or "odd".  With boundary sources present the
    parities are path-dependent, so the verdict is tied to the
    canonical path and flagged.
    """

    verdict: str
    n_crossing: int
    gate_even: bool | None
    hole_pair: tuple[int, int] | None
    path_edges: tuple[int, ...] | None
    path_dependent: bool

    @property
    def occurred(self) -> bool:
        return self.verdict != "none"


def detect_a4_blacksquare(dc, x: Coord, r: int, R: int) -> HoleCrossingEvent:
    """Two crossing holes joined by an even-aggregate-flux dual path.

    Pairs are scanned closest first; the first passing pair decides the
    odd/even classification by the flux of the first current across its
    shortest dual path.
    """
    ann = Annulus((int(x[0]), int(x[1])), r, R)
    holes = label_holes(dc, ann)
    path_dep = bool(dc.sources1 or dc.sources2)
    if holes.n_crossing < 2:
        return HoleCrossingEvent("none", holes.n_crossing, None, None, None,
                                 path_dep)
    agg = np.asarray(dc.agg_parity, dtype=bool)
    eta1 = np.asarray(dc.eta1, dtype=bool)
    first = None
    for la, lb, _ in _pairs_by_distance(holes):
        path = hole_path(holes, la, lb)
        if first is None:
            first = (la, lb, path)
        if not path_flux(agg, path):
            verdict = "odd" if path_flux(eta1, path) else "even"
            return HoleCrossingEvent(verdict, holes.n_crossing, True,
                                     (la, lb), tuple(path), path_dep)
    la, lb, path = first
    return HoleCrossingEvent("none", holes.n_crossing, False, (la, lb),
                             tuple(path), path_dep)


# ---------------------------------------------------------------------
# separation and boundary connection


@dataclass(frozen=True)
class SepReport:
    """Absence of four-arm box events along a box boundary.

    vacuous flags an inner scale larger than the outer one (empty
    scan); witness is the first ring vertex with a four-arm event.
    """

    holds: bool
    vacuous: bool
    witness: Coord | None

    def __bool__(self) -> bool:
        return self.holds


def detect_sep(dc, r: int, delta: float, center: Coord = (0, 0)) -> SepReport:
    """No vertex of the distance-r ring has a four-arm box event at
    scales (round(delta * r), r // 4); inner scale clamps to one."""
    if r < 1:
        raise ValueError("need r >= 1")
    a = max(1, int(np.floor(delta * r + 0.5)))
    b = r // 4
    if a > b:
        return SepReport(True, True, None)
    g = dc.graph
    d = _chebyshev(g, center)
    if int((d <= r + b).sum()) != (2 * (r + b) + 1) ** 2:
        raise ValueError(f"Lambda_{r + b} at {tuple(center)} exceeds the domain")
    cx, cy = int(center[0]), int(center[1])
    ring = sorted({(cx + i, cy + s * r) for i in range(-r, r + 1) for s in (-1, 1)}
                  | {(cx + s * r, cy + j) for j in range(-r, r + 1) for s in (-1, 1)})
    for x in ring:
        if detect_a4_square(dc, x, a, b):
            return SepReport(False, False, x)
    return SepReport(True, False, None)


def _boundary_mask(g: DomainGraph, r: int) -> np.ndarray:
    """Vertices within distance r of the domain boundary, as a mask."""
    key = ("bmask", int(r))
    if key not in g._cache:
        mask = np.zeros(g.n_vertices, dtype=bool)
        near = boundary_neighborhood(g, r)
        if near:
            mask[g.vertex_indices(np.asarray(near, dtype=np.int64))] = True
        g._cache[key] = mask
    return g._cache[key]


def boundary_connection(dc, R: int, r: int,
                        domain: DomainGraph | None = None,
                        center: Coord = (0, 0)) -> bool:
    """Some positive cluster meets both Lambda_R and the width-r
    boundary neighborhood of the sampled domain."""
    g = dc.graph
    if domain is not None and domain is not g:
        raise ValueError("connectivity is evaluated on the sampled domain")
    d = _chebyshev(g, center)
    box = d <= R
    if int(box.sum()) != (2 * R + 1) ** 2:
        raise ValueError(f"Lambda_{R} at {tuple(center)} exceeds the domain")
    lab = _mask_labeling(g, np.asarray(dc.positive, dtype=bool),
                         np.ones(g.n_vertices, dtype=bool))
    return lab.connects(box, _boundary_mask(g, r))


# ---------------------------------------------------------------------
# rectangle crossings


def count_rectangle_crossings(dc, rect: Quad) -> int:
    """Distinct positive clusters of the quad joining its short sides.

    The short pair is the one with fewer vertices per arc; on a square
    the vertical pair (bc), (da) is used.
    """
    lab = label_clusters(dc, rect.domain)
    g = dc.graph
    if len(rect.ab) < len(rect.bc):
        s1, s2 = rect.ab, rect.cd
    else:
        s1, s2 = rect.bc, rect.da
    m1 = np.zeros(g.n_vertices, dtype=bool)
    m1[g.vertex_indices(np.asarray(s1, dtype=np.int64))] = True
    m2 = np.zeros(g.n_vertices, dtype=bool)
    m2[g.vertex_indices(np.asarray(s2, dtype=np.int64))] = True
    return lab.crossing_count(m1, m2)


# ---------------------------------------------------------------------
# coarse boundary boxes


@dataclass(frozen=True)
class CoarseBoundary:
    """Width-r coarse structure of a domain around Lambda_R.

    `component` flags the connected piece containing Lambda_R of the
    union of boxes Lambda_r(x) over centers x on the r-grid whose
    double box fits in the domain.  `boxes` lists the centers whose box
    lies in that piece while the triple box leaves the domain.
    """

    domain: DomainGraph
    r: int
    R: int
    center: Coord
    component: np.ndarray
    boxes: tuple[Coord, ...]


def _grid_centers(g: DomainGraph, r: int) -> list[Coord]:
    x0, y0 = (int(v) for v in g.verts.min(axis=0))
    x1, y1 = (int(v) for v in g.verts.max(axis=0))
    xs = range(-((-x0) // r), x1 // r + 1)
    ys = range(-((-y0) // r), y1 // r + 1)
    return [(i * r, j * r) for i in xs for j in ys]


def coarse_boundary(domain: DomainGraph, r: int, R: int,
                    center: Coord = (0, 0)) -> CoarseBoundary:
    """Coarse interior component and its boundary boxes."""
    if r < 1:
        raise ValueError("need r >= 1")
    g = domain
    d = _chebyshev(g, center)
    if int((d <= R).sum()) != (2 * R + 1) ** 2:
        raise ValueError(f"Lambda_{R} at {tuple(center)} exceeds the domain")

    vx, vy = g.verts[:, 0], g.verts[:, 1]

    def box_count(x: Coord, n: int) -> int:
        return int(((np.abs(vx - x[0]) <= n) & (np.abs(vy - x[1]) <= n)).sum())

    centers = _grid_centers(g, r)
    union = np.zeros(g.n_vertices, dtype=bool)
    for x in centers:
        if box_count(x, 2 * r) == (4 * r + 1) ** 2:
            union |= (np.abs(vx - x[0]) <= r) & (np.abs(vy - x[1]) <= r)
    target = d <= R
    if bool(np.any(target & ~union)):
        raise ValueError("coarse boxes do not cover the target box")
    labels = labels_for_edges(g, union[g.edge_u] & union[g.edge_v])
    comp_ids = np.unique(labels[target])
    component = union & np.isin(labels, comp_ids)

    boxes = []
    for x in centers:
        inside = (np.abs(vx - x[0]) <= r) & (np.abs(vy - x[1]) <= r)
        if int((inside & component).sum()) != (2 * r + 1) ** 2:
            continue
        if box_count(x, 3 * r) == (6 * r + 1) ** 2:
            continue  # triple box still inside the domain
        boxes.append((int(x[0]), int(x[1])))
    return CoarseBoundary(g, r, R, (int(center[0]), int(center[1])),
                          component, tuple(sorted(boxes)))


def count_connected_boundary_boxes(dc, cb: CoarseBoundary) -> int:
    """Boundary boxes joined to Lambda_R by a positive path in the
    whole domain."""
    g = dc.graph
    if g is not cb.domain and (g.n_vertices != cb.domain.n_vertices
                               or not np.array_equal(g.verts, cb.domain.verts)):
        raise ValueError("trace domain differs from the coarse geometry")
    lab = _mask_labeling(g, np.asarray(dc.positive, dtype=bool),
                         np.ones(g.n_vertices, dtype=bool))
    d = _chebyshev(g, cb.center)
    target = np.unique(lab.label[d <= cb.R])
    vx, vy = g.verts[:, 0], g.verts[:, 1]
    count = 0
    for x in cb.boxes:
        inside = (np.abs(vx - x[0]) <= cb.r) & (np.abs(vy - x[1]) <= cb.r)
        hit = np.intersect1d(np.unique(lab.label[inside]), target,
                             assume_unique=True)
        if len(hit):
            count += 1
    return count
