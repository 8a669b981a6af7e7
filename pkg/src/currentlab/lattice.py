"""Finite subgraphs of Z^2: domains, duals, merged vertices, quads.

Vertices are integer pairs (x, y). A graph stores a lexicographically
sorted vertex array and a canonical edge array (indices into the vertex
array, each edge with u < v and edges sorted), so that every derived
quantity -- boundary, dual, labelings -- is reproducible bit for bit.

Faces of Z^2 are identified by the lower-left corner of the unit square:
face (i, j) is the square [i, i+1] x [j, j+1] with center (i+1/2, j+1/2).

Vertex merging is kept as a partition overlay: edges always remain the
original lattice edges, and consumers map endpoints through class ids
(self-class edges are dropped for connectivity, parallel edges retained).
"""

from __future__ import annotations

import io
from dataclasses import dataclass, field
from typing import Iterable, Sequence

import numpy as np

Coord = tuple[int, int]
Edge = tuple[Coord, Coord]

# unit steps in walk order E, N, W, S
_STEPS = ((1, 0), (0, 1), (-1, 0), (0, -1))


def canon_edge(a: Coord, b: Coord) -> Edge:
    """Canonical (sorted) form of an edge between lattice neighbors."""
    return (a, b) if a <= b else (b, a)


@dataclass(frozen=True)
class MergeClass:
    """A named set of vertices identified as a single site."""

    members: frozenset
    name: str | None = None

    def label(self):
        if self.name is not None:
            return self.name
        return min(self.members)


class DomainGraph:
    """A finite subgraph of Z^2 with an optional vertex partition.

    `verts` is an (n, 2) int array sorted by (x, y); `edge_u`, `edge_v`
    hold vertex indices with edge_u[k] < edge_v[k], sorted by
    (edge_u, edge_v).  `merges` lists only nontrivial classes; all other
    vertices are implicit singletons.
    """

    def __init__(self, vertices: Iterable[Coord], edges: Iterable[Edge],
                 merges: Sequence[MergeClass] = ()):
        vs = sorted(set(map(tuple, vertices)))
        if not vs:
            raise ValueError("empty vertex set")
        self.verts = np.asarray(vs, dtype=np.int64).reshape(len(vs), 2)
        vidx = {v: i for i, v in enumerate(vs)}
        eidx = set()
        for a, b in edges:
            a, b = tuple(a), tuple(b)
            if a not in vidx or b not in vidx:
                raise ValueError(f"edge endpoint not a vertex: {(a, b)}")
            if abs(a[0] - b[0]) + abs(a[1] - b[1]) != 1:
                raise ValueError(f"not a lattice edge: {(a, b)}")
            i, j = vidx[a], vidx[b]
            eidx.add((i, j) if i < j else (j, i))
        epairs = sorted(eidx)
        self.edge_u = np.asarray([p[0] for p in epairs], dtype=np.int32)
        self.edge_v = np.asarray([p[1] for p in epairs], dtype=np.int32)
        for mc in merges:
            for v in mc.members:
                if tuple(v) not in vidx:
                    raise ValueError(f"merge class member not a vertex: {v}")
        self.merges = tuple(merges)
        self._cache: dict = {"vidx": vidx}

    @classmethod
    def _from_arrays(cls, verts: np.ndarray, edge_u: np.ndarray,
                     edge_v: np.ndarray, merges: Sequence[MergeClass] = ()
                     ) -> "DomainGraph":
        """Trusted constructor: arrays already canonical (sorted, u < v)."""
        g = cls.__new__(cls)
        g.verts = verts
        g.edge_u = edge_u
        g.edge_v = edge_v
        g.merges = tuple(merges)
        g._cache = {}
        return g

    # coordinate keys, monotone in (x, y) lexicographic order
    @property
    def _vkeys(self) -> np.ndarray:
        if "vkeys" not in self._cache:
            self._cache["vkeys"] = self.verts[:, 0] * (1 << 32) + self.verts[:, 1]
        return self._cache["vkeys"]

    def vertex_indices(self, coords) -> np.ndarray:
        """Vertex index per (m, 2) coordinate row; raises on misses."""
        arr = np.asarray(coords, dtype=np.int64).reshape(-1, 2)
        keys = arr[:, 0] * (1 << 32) + arr[:, 1]
        idx = np.searchsorted(self._vkeys, keys)
        idx = np.minimum(idx, len(self.verts) - 1)
        bad = self._vkeys[idx] != keys
        if np.any(bad):
            miss = arr[np.nonzero(bad)[0][0]]
            raise KeyError(f"not a vertex: {tuple(int(c) for c in miss)}")
        return idx

    @property
    def _ekeys(self) -> np.ndarray:
        if "ekeys" not in self._cache:
            n = len(self.verts)
            self._cache["ekeys"] = (self.edge_u.astype(np.int64) * n
                                    + self.edge_v.astype(np.int64))
        return self._cache["ekeys"]

    def edge_indices(self, coord_pairs) -> np.ndarray:
        """Edge index per ((x1,y1),(x2,y2)) row; endpoints in any order."""
        arr = np.asarray(coord_pairs, dtype=np.int64).reshape(-1, 2, 2)
        ia = self.vertex_indices(arr[:, 0, :])
        ib = self.vertex_indices(arr[:, 1, :])
        lo = np.minimum(ia, ib).astype(np.int64)
        hi = np.maximum(ia, ib).astype(np.int64)
        keys = lo * len(self.verts) + hi
        idx = np.searchsorted(self._ekeys, keys)
        idx = np.minimum(idx, len(self.edge_u) - 1)
        bad = self._ekeys[idx] != keys
        if np.any(bad):
            k = np.nonzero(bad)[0][0]
            raise KeyError(f"not an edge: {arr[k].tolist()}")
        return idx

    # -- basic views ---------------------------------------------------

    @property
    def n_vertices(self) -> int:
        return len(self.verts)

    @property
    def n_edges(self) -> int:
        return len(self.edge_u)

    def vertex_list(self) -> list[Coord]:
        if "vlist" not in self._cache:
            self._cache["vlist"] = [(int(x), int(y)) for x, y in self.verts]
        return self._cache["vlist"]

    def vertex_set(self) -> frozenset:
        if "vset" not in self._cache:
            self._cache["vset"] = frozenset(self.vertex_list())
        return self._cache["vset"]

    def edge_list(self) -> list[Edge]:
        if "elist" not in self._cache:
            vl = self.vertex_list()
            self._cache["elist"] = [
                (vl[u], vl[v]) for u, v in zip(self.edge_u, self.edge_v)
            ]
        return self._cache["elist"]

    def edge_set(self) -> frozenset:
        if "eset" not in self._cache:
            self._cache["eset"] = frozenset(self.edge_list())
        return self._cache["eset"]

    @property
    def _vidx(self) -> dict:
        if "vidx" not in self._cache:
            self._cache["vidx"] = {v: i for i, v in enumerate(self.vertex_list())}
        return self._cache["vidx"]

    def vertex_index(self, v: Coord) -> int:
        return int(self.vertex_indices([tuple(v)])[0])

    def edge_index(self, a: Coord, b: Coord) -> int:
        return int(self.edge_indices([(tuple(a), tuple(b))])[0])

    def has_vertex(self, v) -> bool:
        try:
            self.vertex_index(v)
            return True
        except KeyError:
            return False

    def has_edge(self, a, b) -> bool:
        try:
            self.edge_index(a, b)
            return True
        except KeyError:
            return False

    def neighbors(self, v: Coord) -> list[Coord]:
        x, y = v
        return [(x + dx, y + dy) for dx, dy in _STEPS
                if self.has_edge((x, y), (x + dx, y + dy))]

    # -- merge overlay -------------------------------------------------

    def class_labels(self) -> list:
        """Label per class, ordered by class id (see class_ids)."""
        self.class_ids()
        return self._cache["clabels"]

    def class_ids(self) -> np.ndarray:
        """Class id per vertex index.

        Singleton classes come first in vertex order, then nontrivial
        classes in their stored order; ids are contiguous from 0.
        """
        if "cids" not in self._cache:
            owner = np.full(self.n_vertices, -1, dtype=np.int64)
            for k, mc in enumerate(self.merges):
                for v in mc.members:
                    i = self._vidx[tuple(v)]
                    if owner[i] != -1:
                        raise ValueError("merge classes overlap")
                    owner[i] = k
            ids = np.full(self.n_vertices, -1, dtype=np.int64)
            labels = []
            nxt = 0
            vl = self.vertex_list()
            for i in range(self.n_vertices):
                if owner[i] == -1:
                    ids[i] = nxt
                    labels.append(vl[i])
                    nxt += 1
            base = nxt
            for k, mc in enumerate(self.merges):
                labels.append(mc.label())
            for i in range(self.n_vertices):
                if owner[i] != -1:
                    ids[i] = base + owner[i]
            self._cache["cids"] = ids
            self._cache["clabels"] = labels
        return self._cache["cids"]

    @property
    def n_classes(self) -> int:
        return len(self.class_labels())

    def label_of(self, v: Coord):
        return self.class_labels()[self.class_ids()[self.vertex_index(v)]]

    def class_of_label(self, label) -> int:
        if "labdict" not in self._cache:
            self._cache["labdict"] = {
                lab: k for k, lab in enumerate(self.class_labels())
            }
        return self._cache["labdict"][label]

    def effective_edges(self) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
        """(class_u, class_v, original edge index) with self-class edges dropped.

        Parallel edges between two classes are retained: they are distinct
        lattice edges and keep their own randomness.
        """
        if "eff" not in self._cache:
            ids = self.class_ids()
            cu = ids[self.edge_u]
            cv = ids[self.edge_v]
            keep = cu != cv
            lo = np.minimum(cu, cv)[keep]
            hi = np.maximum(cu, cv)[keep]
            self._cache["eff"] = (lo, hi, np.nonzero(keep)[0].astype(np.int64))
        return self._cache["eff"]

    # -- boundary ------------------------------------------------------

    def boundary_indices(self) -> np.ndarray:
        """Vertices incident to a Z^2 edge absent from the graph."""
        if "bidx" not in self._cache:
            deg = np.zeros(self.n_vertices, dtype=np.int64)
            np.add.at(deg, self.edge_u, 1)
            np.add.at(deg, self.edge_v, 1)
            self._cache["bidx"] = np.nonzero(deg < 4)[0]
        return self._cache["bidx"]

    def boundary_vertices(self) -> list[Coord]:
        vl = self.vertex_list()
        return [vl[i] for i in self.boundary_indices()]

    def is_domain(self) -> bool:
        """True when the boundary is a single self-avoiding polygon."""
        try:
            poly = self.boundary_polygon()
        except ValueError:
            return False
        return len(set(poly)) == len(self.boundary_indices())

    def boundary_polygon(self) -> list[Coord]:
        """Boundary as an ordered cycle; raises if not a simple polygon."""
        walk = self.outer_walk()
        if not walk:
            raise ValueError("graph has no edges")
        seq = [a for a, _ in walk]
        if len(seq) != len(set(seq)):
            raise ValueError("boundary walk revisits a vertex; not a domain")
        return seq

    def outer_walk(self) -> list[tuple[Coord, Coord]]:
        """Directed edge traversal of the unbounded face, oriented so the
        outside is on the right.  Thin (bridge) edges appear twice, once
        per direction.  Deterministic: starts at the lowest, then
        leftmost vertex heading east (or north for a vertical sliver).
        """
        if "owalk" in self._cache:
            return self._cache["owalk"]
        if self.n_edges == 0:
            self._cache["owalk"] = []
            return []
        if not self.is_connected():
            raise ValueError("outer walk needs a connected graph")
        vl = self.vertex_list()
        start = min(vl, key=lambda v: (v[1], v[0]))
        # no neighbor below or to the left of start
        if self.has_edge(start, (start[0] + 1, start[1])):
            head = (1, 0)
        elif self.has_edge(start, (start[0], start[1] + 1)):
            head = (0, 1)
        else:
            raise ValueError("start vertex is isolated; graph must be connected")
        walk = []
        v, d = start, head
        first = (v, d)
        while True:
            w = (v[0] + d[0], v[1] + d[1])
            walk.append((v, w))
            # right-hand rule: try right turn, then straight, left, back
            di = _STEPS.index(d)
            for turn in (-1, 0, 1, 2):
                nd = _STEPS[(di + turn) % 4]
                if self.has_edge(w, (w[0] + nd[0], w[1] + nd[1])):
                    break
            else:
                raise ValueError("dangling vertex with no continuation")
            v, d = w, nd
            if (v, d) == first:
                break
            if len(walk) > 4 * self.n_edges + 4:
                raise ValueError("outer walk failed to close; disconnected graph?")
        self._cache["owalk"] = walk
        return walk

    # -- misc ----------------------------------------------------------

    def is_connected(self) -> bool:
        from scipy.sparse import coo_matrix
        from scipy.sparse.csgraph import connected_components
        if self.n_vertices == 1:
            return True
        g = coo_matrix(
            (np.ones(self.n_edges, dtype=np.int8), (self.edge_u, self.edge_v)),
            shape=(self.n_vertices, self.n_vertices),
        )
        ncomp, _ = connected_components(g, directed=False)
        return ncomp == 1

    def __repr__(self):
        return (f"DomainGraph(|V|={self.n_vertices}, |E|={self.n_edges}, "
                f"merges={len(self.merges)})")


@dataclass(frozen=True)
class Annulus:
    """Ann(r, R) around a center: vertices v with r <= |v - center|_inf <= R."""

    center: Coord
    r: int
    R: int

    def __post_init__(self):
        if not (0 < self.r <= self.R):
            raise ValueError("need 0 < r <= R")

    def dist(self, v: Coord) -> int:
        return max(abs(v[0] - self.center[0]), abs(v[1] - self.center[1]))

    def contains_vertex(self, v: Coord) -> bool:
        return self.r <= self.dist(v) <= self.R

    def face_dist(self, f: Coord) -> float:
        # center of face (i, j) sits at (i + 1/2, j + 1/2)
        return max(abs(f[0] + 0.5 - self.center[0]),
                   abs(f[1] + 0.5 - self.center[1]))

    def contains_face(self, f: Coord) -> bool:
        return self.r - 0.5 <= self.face_dist(f) <= self.R - 0.5


class DualGraph:
    """Dual description of a DomainGraph.

    One dual vertex per face of Z^2 adjacent to at least one edge; inner
    faces are the unit squares whose four sides all belong to the graph.
    `edge_faces[k]` gives the two faces separated by primal edge k.
    """

    def __init__(self, g: DomainGraph):
        self.primal = g
        ua = g.verts[g.edge_u]
        va = g.verts[g.edge_v]
        horiz = ua[:, 1] == va[:, 1]
        fx = np.minimum(ua[:, 0], va[:, 0])
        fy = np.minimum(ua[:, 1], va[:, 1])
        # horizontal edge: faces (x, y-1) and (x, y); vertical: (x-1, y), (x, y)
        fa = np.where(horiz[:, None],
                      np.column_stack([fx, fy - 1]),
                      np.column_stack([fx - 1, fy]))
        fb = np.column_stack([fx, fy])
        allf = np.concatenate([fa, fb])
        fkeys = allf[:, 0] * (1 << 32) + allf[:, 1]
        ukeys, first = np.unique(fkeys, return_index=True)
        self.face_coords = allf[first]
        self._cache: dict = {}
        m = g.n_edges
        self.edge_face_a = np.searchsorted(ukeys, fkeys[:m]).astype(np.int32)
        self.edge_face_b = np.searchsorted(ukeys, fkeys[m:]).astype(np.int32)

        # inner faces: all four sides present
        def has_edges(a_coords, b_coords):
            ka = a_coords[:, 0] * (1 << 32) + a_coords[:, 1]
            kb = b_coords[:, 0] * (1 << 32) + b_coords[:, 1]
            vk = g._vkeys
            ia = np.minimum(np.searchsorted(vk, ka), len(vk) - 1)
            ib = np.minimum(np.searchsorted(vk, kb), len(vk) - 1)
            ok = (vk[ia] == ka) & (vk[ib] == kb)
            out = np.zeros(len(ka), dtype=bool)
            if np.any(ok):
                n = len(vk)
                ekeys = (np.minimum(ia[ok], ib[ok]).astype(np.int64) * n
                         + np.maximum(ia[ok], ib[ok]).astype(np.int64))
                pos = np.minimum(np.searchsorted(g._ekeys, ekeys), m - 1)
                out[ok] = g._ekeys[pos] == ekeys
            return out

        fc = self.face_coords
        c00 = fc
        c10 = fc + [1, 0]
        c01 = fc + [0, 1]
        c11 = fc + [1, 1]
        self.inner = (has_edges(c00, c10) & has_edges(c01, c11)
                      & has_edges(c00, c01) & has_edges(c10, c11))

    @property
    def n_faces(self) -> int:
        return len(self.face_coords)

    @property
    def faces(self) -> list[Coord]:
        if "faces" not in self._cache:
            self._cache["faces"] = [(int(x), int(y)) for x, y in self.face_coords]
        return self._cache["faces"]

    @property
    def _fidx(self) -> dict:
        if "fidx" not in self._cache:
            self._cache["fidx"] = {f: i for i, f in enumerate(self.faces)}
        return self._cache["fidx"]

    def face_index(self, f: Coord) -> int:
        return self._fidx[tuple(f)]

    def has_face(self, f) -> bool:
        return tuple(f) in self._fidx

    def dual_edge(self, k: int) -> tuple[Coord, Coord]:
        return (self.faces[self.edge_face_a[k]], self.faces[self.edge_face_b[k]])


class FaceGrid:
    """Finite grid of plane faces covering the graph with a free margin.

    Face (i, j) is the unit square [i, i+1] x [j, j+1].  Steps between
    L1-adjacent faces either cross a graph edge (recorded by its index)
    or a free segment (-1).  The margin of two guarantees an all-free
    outer ring, so connectivity here with any set of blocked graph edges
    coincides with connectivity in the full plane.
    """

    def __init__(self, g: DomainGraph):
        self.primal = g
        x0, y0 = (int(v) for v in g.verts.min(axis=0))
        x1, y1 = (int(v) for v in g.verts.max(axis=0))
        self.x0, self.y0 = x0 - 2, y0 - 2
        self.nx = (x1 + 1) - self.x0 + 1
        self.ny = (y1 + 1) - self.y0 + 1
        es = g.edge_set()

        def eidx(a, b):
            e = canon_edge(a, b)
            return g.edge_index(*e) if e in es else -1

        sa, sb, se = [], [], []
        for j in range(self.ny):
            for i in range(self.nx):
                f = j * self.nx + i
                fx, fy = self.x0 + i, self.y0 + j
                if i + 1 < self.nx:  # crossing the segment at x = fx+1
                    sa.append(f)
                    sb.append(f + 1)
                    se.append(eidx((fx + 1, fy), (fx + 1, fy + 1)))
                if j + 1 < self.ny:  # crossing the segment at y = fy+1
                    sa.append(f)
                    sb.append(f + self.nx)
                    se.append(eidx((fx, fy + 1), (fx + 1, fy + 1)))
        self.step_a = np.asarray(sa, dtype=np.int64)
        self.step_b = np.asarray(sb, dtype=np.int64)
        self.step_edge = np.asarray(se, dtype=np.int64)

    @property
    def n_faces(self) -> int:
        return self.nx * self.ny

    def face_id(self, f: Coord) -> int:
        i, j = int(f[0]) - self.x0, int(f[1]) - self.y0
        if not (0 <= i < self.nx and 0 <= j < self.ny):
            raise ValueError(f"face {tuple(f)} outside the covered grid")
        return j * self.nx + i

    def face_at(self, fid: int) -> Coord:
        return (self.x0 + fid % self.nx, self.y0 + fid // self.nx)

    def connected(self, f_from: Coord, f_to: Coord, blocked) -> bool:
        """Plane connectivity when the given graph edges are blocked."""
        blocked = np.asarray(blocked, dtype=bool)
        keep = (self.step_edge < 0) | ~blocked[np.maximum(self.step_edge, 0)]
        labels = _union_labels(self.n_faces, self.step_a[keep], self.step_b[keep])
        return labels[self.face_id(f_from)] == labels[self.face_id(f_to)]

    def path(self, f_from: Coord, f_to: Coord) -> list[int]:
        """Graph edges crossed by a deterministic plane path of faces.

        BFS by face id, so the route and the returned edge index list
        are reproducible.  Free segments are crossed silently.
        """
        src, dst = self.face_id(f_from), self.face_id(f_to)
        adj: dict[int, list[tuple[int, int]]] = {}
        for a, b, e in zip(self.step_a, self.step_b, self.step_edge):
            adj.setdefault(int(a), []).append((int(b), int(e)))
            adj.setdefault(int(b), []).append((int(a), int(e)))
        for k in adj:
            adj[k].sort()
        from collections import deque
        prev: dict[int, tuple[int, int]] = {src: (-1, -1)}
        qq = deque([src])
        while qq:
            x = qq.popleft()
            if x == dst:
                break
            for y, e in adj[x]:
                if y not in prev:
                    prev[y] = (x, e)
                    qq.append(y)
        out = []
        x = dst
        while x != src:
            x, e = prev[x]
            if e >= 0:
                out.append(e)
        out.reverse()
        return out


def _union_labels(n: int, a: np.ndarray, b: np.ndarray) -> np.ndarray:
    """Connected component label per node for edge lists a-b (scipy)."""
    from scipy.sparse import coo_matrix
    from scipy.sparse.csgraph import connected_components
    m = coo_matrix((np.ones(len(a), dtype=np.int8), (a, b)), shape=(n, n))
    _, labels = connected_components(m, directed=False)
    return labels


@dataclass(frozen=True)
class Quad:
    """A domain with four marked boundary arcs (ab), (bc), (cd), (da).

    Arcs are ordered vertex tuples along the boundary polygon; adjacent
    arcs share their corner vertex.
    """

    domain: DomainGraph
    ab: tuple
    bc: tuple
    cd: tuple
    da: tuple

    def __post_init__(self):
        bset = set(self.domain.boundary_vertices())
        for arc in (self.ab, self.bc, self.cd, self.da):
            if not arc:
                raise ValueError("empty arc")
            for v in arc:
                if tuple(v) not in bset:
                    raise ValueError(f"arc vertex {v} not on the boundary")

    def arcs(self):
        return {"ab": self.ab, "bc": self.bc, "cd": self.cd, "da": self.da}


# -- builders ----------------------------------------------------------


def build_box(n: int, center: Coord = (0, 0)) -> DomainGraph:
    """Lambda_n around center: the (2n+1) x (2n+1) box with all edges."""
    if n < 0:
        raise ValueError("n must be >= 0")
    cx, cy = center
    side = np.arange(-n, n + 1, dtype=np.int64)
    xx, yy = np.meshgrid(side + cx, side + cy, indexing="ij")
    return domain_from_vertices(np.column_stack([xx.ravel(), yy.ravel()]))


def build_grid(w: int, h: int) -> DomainGraph:
    """The w x h grid on [0, w-1] x [0, h-1] (w, h count vertices)."""
    if w < 1 or h < 1:
        raise ValueError("grid needs w, h >= 1")
    xx, yy = np.meshgrid(np.arange(w, dtype=np.int64),
                         np.arange(h, dtype=np.int64), indexing="ij")
    return domain_from_vertices(np.column_stack([xx.ravel(), yy.ravel()]))


def domain_from_vertices(vertices) -> DomainGraph:
    """Subgraph induced by a vertex set: all lattice edges inside it."""
    arr = np.asarray(sorted(set(map(tuple, vertices))) if not
                     isinstance(vertices, np.ndarray) else vertices,
                     dtype=np.int64)
    if arr.size == 0:
        raise ValueError("empty vertex set")
    arr = arr.reshape(-1, 2)
    keys = arr[:, 0] * (1 << 32) + arr[:, 1]
    order = np.argsort(keys)
    keys = keys[order]
    if len(keys) > 1 and np.any(np.diff(keys) == 0):
        keep = np.concatenate([[True], np.diff(keys) != 0])
        keys = keys[keep]
        verts = arr[order][keep]
    else:
        verts = arr[order]

    def find_neighbors(delta):
        tgt = keys + delta
        pos = np.searchsorted(keys, tgt)
        pos = np.minimum(pos, len(keys) - 1)
        hit = keys[pos] == tgt
        return np.nonzero(hit)[0], pos[hit]

    # up neighbor at key+1, right neighbor at key + 2^32
    uu, uv = find_neighbors(1)
    ru, rv = find_neighbors(1 << 32)
    eu = np.concatenate([uu, ru])
    ev = np.concatenate([uv, rv])
    srt = np.lexsort((ev, eu))
    return DomainGraph._from_arrays(verts, eu[srt].astype(np.int32),
                                    ev[srt].astype(np.int32))


def build_annulus(r: int, R: int, center: Coord = (0, 0)) -> DomainGraph:
    """The induced graph on Ann(r, R) = Lambda_R minus Lambda_{r-1}."""
    ann = Annulus(center, r, R)
    cx, cy = center
    vs = [(cx + i, cy + j)
          for i in range(-R, R + 1) for j in range(-R, R + 1)
          if ann.contains_vertex((cx + i, cy + j))]
    return domain_from_vertices(vs)


def merge_vertices(g: DomainGraph, classes: Sequence[tuple[str | None, Iterable[Coord]]]
                   ) -> DomainGraph:
    """Merge vertex sets into single sites; composes with prior merges.

    `classes` is a sequence of (name, vertices).  A new class absorbs any
    existing class it intersects.
    """
    groups: list[set] = [set(map(tuple, mc.members)) for mc in g.merges]
    names: list[str | None] = [mc.name for mc in g.merges]
    for name, vs in classes:
        new = set(map(tuple, vs))
        if not new:
            raise ValueError("empty merge class")
        keep_g, keep_n = [], []
        for grp, nm in zip(groups, names):
            if grp & new:
                new |= grp
            else:
                keep_g.append(grp)
                keep_n.append(nm)
        groups = keep_g + [new]
        names = keep_n + [name]
    merges = [MergeClass(frozenset(grp), nm) for grp, nm in zip(groups, names)]
    return DomainGraph(g.vertex_list(), g.edge_list(), merges)


def dual_of(g: DomainGraph) -> DualGraph:
    return DualGraph(g)


def boundary_neighborhood(g: DomainGraph, r: int) -> list[Coord]:
    """Vertices within L-infinity distance r of the boundary."""
    from scipy.spatial import cKDTree
    bidx = g.boundary_indices()
    if len(bidx) == 0:
        return []
    tree = cKDTree(g.verts[bidx])
    d, _ = tree.query(g.verts, k=1, p=np.inf)
    vl = g.vertex_list()
    return [vl[i] for i in np.nonzero(d <= r + 1e-9)[0]]


def build_rect_quad(w: int, h: int, origin: Coord = (0, 0)) -> Quad:
    """Rectangle quad on [0,w] x [0,h] edges; arcs are the four sides.

    Corners a=(0,0), b=(w,0), c=(w,h), d=(0,h) counterclockwise, so (ab)
    is the bottom, (bc) the right, (cd) the top and (da) the left side.
    """
    if w < 1 or h < 1:
        raise ValueError("rectangle needs w, h >= 1")
    ox, oy = origin
    vs = [(ox + i, oy + j) for i in range(w + 1) for j in range(h + 1)]
    dom = domain_from_vertices(vs)
    ab = tuple((ox + i, oy) for i in range(w + 1))
    bc = tuple((ox + w, oy + j) for j in range(h + 1))
    cd = tuple((ox + w - i, oy + h) for i in range(w + 1))
    da = tuple((ox, oy + h - j) for j in range(h + 1))
    return Quad(dom, ab, bc, cd, da)


# -- serialization -----------------------------------------------------

_FMT_HEADER = "# currentlab domain v1"


def to_text(g, kind: str = "custom", quad: Quad | None = None) -> str:
    """Line-oriented text form: header, vertices, edges, merges, arcs.

    Accepts a DomainGraph, or a Quad (serialized with its arcs).
    """
    if isinstance(g, Quad):
        quad = g
        g = g.domain
        if kind == "custom":
            kind = "quad"
    out = io.StringIO()
    out.write(_FMT_HEADER + "\n")
    out.write(f"kind {kind}\n")
    for (x, y) in g.vertex_list():
        out.write(f"vertex {x} {y}\n")
    for (a, b) in g.edge_list():
        out.write(f"edge {a[0]} {a[1]} {b[0]} {b[1]}\n")
    for mc in g.merges:
        nm = mc.name if mc.name is not None else "-"
        coords = " ".join(f"{x} {y}" for (x, y) in sorted(mc.members))
        out.write(f"merge {nm} {coords}\n")
    if quad is not None:
        for nm, arc in quad.arcs().items():
            coords = " ".join(f"{x} {y}" for (x, y) in arc)
            out.write(f"arc {nm} {coords}\n")
    return out.getvalue()


def from_text(text: str) -> tuple[DomainGraph, Quad | None, str]:
    """Parse the domain text format; returns (graph, quad or None, kind)."""
    lines = [ln.strip() for ln in text.splitlines()]
    lines = [ln for ln in lines if ln and not ln.startswith("#")]
    kind = "custom"
    vs: list[Coord] = []
    es: list[Edge] = []
    merges: list[MergeClass] = []
    arcs: dict[str, tuple] = {}
    for ln in lines:
        parts = ln.split()
        tag = parts[0]
        if tag == "kind":
            kind = " ".join(parts[1:])
        elif tag == "vertex":
            vs.append((int(parts[1]), int(parts[2])))
        elif tag == "edge":
            es.append(((int(parts[1]), int(parts[2])),
                       (int(parts[3]), int(parts[4]))))
        elif tag == "merge":
            nm = None if parts[1] == "-" else parts[1]
            nums = list(map(int, parts[2:]))
            if len(nums) % 2:
                raise ValueError(f"odd coordinate count in merge line: {ln}")
            mem = frozenset((nums[i], nums[i + 1]) for i in range(0, len(nums), 2))
            merges.append(MergeClass(mem, nm))
        elif tag == "arc":
            nums = list(map(int, parts[2:]))
            if len(nums) % 2:
                raise ValueError(f"odd coordinate count in arc line: {ln}")
            arcs[parts[1]] = tuple((nums[i], nums[i + 1])
                                   for i in range(0, len(nums), 2))
        else:
            raise ValueError(f"unknown line tag: {tag}")
    g = DomainGraph(vs, es, merges)
    quad = None
    if arcs:
        missing = {"ab", "bc", "cd", "da"} - set(arcs)
        if missing:
            raise ValueError(f"quad arcs incomplete, missing {sorted(missing)}")
        quad = Quad(g, arcs["ab"], arcs["bc"], arcs["cd"], arcs["da"])
    return g, quad, kind
