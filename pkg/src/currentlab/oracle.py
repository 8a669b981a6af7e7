"""Brute-force oracles for the critical current model on small graphs.

Everything here enumerates: parity configurations (even subgraphs with
prescribed odd-degree sites), sprinkled positivity, FK configurations,
and spin assignments.  The enumerations are independent routes to the
same quantities, so they can referee each other and the samplers.

A current n assigns a nonnegative integer to each edge; its sources are
the sites of odd incident sum and its trace is the pair (parity bit,
positivity bit) per edge.  Summing the critical weights prod beta^n/n!
over currents with a fixed parity vector eta gives
cosh(beta)^|E| t^|eta| with t = tanh(beta), and conditionally on eta the
events {n_e > 0} are independent with rate q = 1 - 1/cosh(beta) on even
edges.  All trace-level computations below rest on that reduction; it is
itself validated by `validate_parity_reduction` against truncated series.

Caps: parity enumeration is O(2^|E|) (default cap 24, transiently
~0.5 GB at the cap), trace tables O(3^|E|) (cap 14), spin sums
O(2^sites) (cap 20).
"""

from __future__ import annotations

import math
from collections import deque
from dataclasses import dataclass, field
from fractions import Fraction
from functools import lru_cache
from typing import Callable, Iterable

import numpy as np

from .constants import BETA_C, P_C, Q_EVEN, Q_EVEN2, TANH_BC
from .exactalg import AlgNum
from .lattice import (DomainGraph, FaceGrid, canon_edge, domain_from_vertices)


# ---------------------------------------------------------------------
# site multigraphs


@dataclass(frozen=True)
class SiteGraph:
    """Finite multigraph over hashable site labels.

    `slots` lists endpoint index pairs; repeated pairs are parallel
    edges with independent randomness.  `keys` carries a stable
    identifier per slot (the lattice edge, for graphs built from a
    DomainGraph).
    """

    sites: tuple
    slots: tuple
    keys: tuple

    def __post_init__(self):
        for (i, j) in self.slots:
            if i == j:
                raise ValueError("self-loop slot; drop self-class edges first")

    @staticmethod
    def from_domain(g: DomainGraph) -> "SiteGraph":
        labels = tuple(g.class_labels())
        cu, cv, orig = g.effective_edges()
        vl = g.vertex_list()
        elist = g.edge_list()
        slots = tuple((int(a), int(b)) for a, b in zip(cu, cv))
        keys = tuple(elist[k] for k in orig)
        return SiteGraph(labels, slots, keys)

    @staticmethod
    def from_pairs(sites: Iterable, pairs: Iterable) -> "SiteGraph":
        sites = tuple(sites)
        idx = {s: i for i, s in enumerate(sites)}
        slots = tuple((idx[a], idx[b]) for a, b in pairs)
        return SiteGraph(sites, slots, tuple(range(len(slots))))

    @property
    def n_edges(self) -> int:
        return len(self.slots)

    @property
    def n_sites(self) -> int:
        return len(self.sites)

    def site_index(self, label) -> int:
        if not hasattr(self, "_sidx"):
            object.__setattr__(self, "_sidx", {s: i for i, s in enumerate(self.sites)})
        return self._sidx[label]

    def source_mask(self, labels: Iterable) -> int:
        m = 0
        for lab in labels:
            lab = tuple(lab) if isinstance(lab, (list, tuple)) else lab
            b = 1 << self.site_index(lab)
            if m & b:
                raise ValueError(f"repeated source label {lab!r}")
            m |= b
        return m


def _as_sitegraph(g) -> SiteGraph:
    if isinstance(g, SiteGraph):
        return g
    return SiteGraph.from_domain(g)


def _coerce_labels(labels) -> frozenset:
    out = set()
    for lab in labels:
        out.add(tuple(lab) if isinstance(lab, (list, tuple)) else lab)
    return frozenset(out)


# ---------------------------------------------------------------------
# parity enumeration


@lru_cache(maxsize=128)
def _parity_groups(sg: SiteGraph, cap: int):
    """Group all parity configs by source mask.

    Returns dict: source_mask -> (masks int64 array, |eta| int64 array),
    masks ascending within each group.
    """
    E = sg.n_edges
    if E > cap:
        raise ValueError(f"|E| = {E} exceeds enumeration cap {cap}")
    if sg.n_sites > 62:
        raise ValueError("at most 62 sites supported (bitmask source sets)")
    masks = np.arange(1 << E, dtype=np.int64)
    src = np.zeros(1 << E, dtype=np.int64)
    for e, (i, j) in enumerate(sg.slots):
        flip = (1 << i) ^ (1 << j)
        src ^= np.where((masks >> e) & 1 == 1, flip, 0)
    sizes = np.bitwise_count(masks).astype(np.int64)
    order = np.argsort(src, kind="stable")
    s_sorted = src[order]
    cuts = np.nonzero(np.diff(s_sorted))[0] + 1
    bounds = np.concatenate([[0], cuts, [len(order)]])
    out = {}
    for lo, hi in zip(bounds[:-1], bounds[1:]):
        key = int(s_sorted[lo])
        sel = order[lo:hi]
        sel.sort()
        out[key] = (masks[sel], sizes[sel])
    return out


@dataclass
class ParityTable:
    """All parity configs with given sources, weighted t^|eta|."""

    graph: SiteGraph
    sources: frozenset
    masks: np.ndarray
    sizes: np.ndarray

    def total(self, t: float = TANH_BC) -> float:
        return float(np.sum(np.power(float(t), self.sizes)))

    def poly(self) -> np.ndarray:
        """Integer coefficients of sum t^|eta| by degree."""
        return np.bincount(self.sizes, minlength=self.graph.n_edges + 1)

    def poly_alg(self) -> AlgNum:
        co = self.poly()
        return AlgNum({k: Fraction(int(c)) for k, c in enumerate(co) if c}, {}, 0)

    def __len__(self):
        return len(self.masks)


def enumerate_parity(g, sources: Iterable = (), cap: int = 24) -> ParityTable:
    """All eta with d(eta) = sources; weight of eta is t^|eta|.

    The total equals Z^B(G) / cosh(beta)^|E| on the effective multigraph
    (self-class edges excluded; their factors cancel in every normalized
    quantity).
    """
    sg = _as_sitegraph(g)
    srcs = _coerce_labels(sources)
    m = sg.source_mask(srcs)
    groups = _parity_groups(sg, cap)
    if m not in groups:
        return ParityTable(sg, srcs, np.empty(0, np.int64), np.empty(0, np.int64))
    masks, sizes = groups[m]
    return ParityTable(sg, srcs, masks, sizes)


def correlation_exact(g, b: Iterable, t: float = TANH_BC, cap: int = 24) -> float:
    """<sigma_B> on the (possibly merged) graph, by parity enumeration."""
    sg = _as_sitegraph(g)
    bset = _coerce_labels(b)
    if len(bset) % 2:
        raise ValueError("source set must have even cardinality")
    num = enumerate_parity(sg, bset, cap).total(t)
    den = enumerate_parity(sg, (), cap).total(t)
    if num == 0.0:
        raise ValueError("sources unrealizable on this graph (disconnected?)")
    return num / den


def spin_correlation_bruteforce(g, b: Iterable, beta: float = BETA_C,
                                cap_sites: int = 20) -> float:
    """<sigma_B> by direct Boltzmann sum over site spin assignments.

    Merged classes are single spins; parallel edges double the coupling.
    Independent of the parity route -- used to referee it.
    """
    sg = _as_sitegraph(g)
    n = sg.n_sites
    if n > cap_sites:
        raise ValueError(f"{n} sites exceeds spin-sum cap {cap_sites}")
    bset = _coerce_labels(b)
    bidx = [sg.site_index(lab) for lab in bset]
    num = 0.0
    den = 0.0
    confs = np.arange(1 << n, dtype=np.int64)
    spins = np.empty((1 << n, n), dtype=np.float64)
    for i in range(n):
        spins[:, i] = np.where((confs >> i) & 1 == 1, 1.0, -1.0)
    energy = np.zeros(1 << n, dtype=np.float64)
    for (i, j) in sg.slots:
        energy += spins[:, i] * spins[:, j]
    w = np.exp(beta * energy)
    prod = np.ones(1 << n, dtype=np.float64)
    for i in bidx:
        prod *= spins[:, i]
    num = float(np.sum(w * prod))
    den = float(np.sum(w))
    return num / den


def edge_positive_marginals(g, b: Iterable = (), q: float = Q_EVEN,
                            t: float = TANH_BC, cap: int = 24) -> np.ndarray:
    """P(n_e > 0) per effective edge for a single current with sources b."""
    tab = enumerate_parity(g, b, cap)
    if len(tab) == 0:
        raise ValueError("sources unrealizable")
    w = np.power(float(t), tab.sizes)
    z = w.sum()
    out = np.empty(tab.graph.n_edges)
    for e in range(tab.graph.n_edges):
        odd = ((tab.masks >> e) & 1) == 1
        p_odd = float(w[odd].sum()) / z
        out[e] = p_odd + q * (1.0 - p_odd)
    return out


# ---------------------------------------------------------------------
# trace tables


@dataclass
class TraceTable:
    """Joint law of (parity mask, positivity mask) for one current."""

    graph: SiteGraph
    sources: frozenset
    parity: np.ndarray
    positive: np.ndarray
    prob: np.ndarray

    def probability(self, event: Callable[[int, int], bool]) -> float:
        tot = 0.0
        for p, v, pr in zip(self.parity, self.positive, self.prob):
            if event(int(p), int(v)):
                tot += float(pr)
        return tot


def trace_distribution_exact(g, b: Iterable = (), q: float = Q_EVEN,
                             t: float = TANH_BC, cap: int = 14) -> TraceTable:
    """Exact trace distribution by summing the sprinkle over even edges."""
    sg = _as_sitegraph(g)
    E = sg.n_edges
    if E > cap:
        raise ValueError(f"|E| = {E} exceeds trace cap {cap}")
    tab = enumerate_parity(sg, b, cap=max(cap, 24))
    if len(tab) == 0:
        raise ValueError("sources unrealizable")
    z = tab.total(t)
    full = (1 << E) - 1
    ps, vs, prs = [], [], []
    for m, s in zip(tab.masks, tab.sizes):
        m = int(m)
        base = (float(t) ** int(s)) / z
        comp = full & ~m
        sub = comp
        while True:
            k = int(sub).bit_count()
            w = base * (q ** k) * ((1.0 - q) ** (int(comp).bit_count() - k))
            ps.append(m)
            vs.append(m | sub)
            prs.append(w)
            if sub == 0:
                break
            sub = (sub - 1) & comp
    return TraceTable(sg, _coerce_labels(b), np.asarray(ps, np.int64),
                      np.asarray(vs, np.int64), np.asarray(prs))


def mask_bits(mask: int, n: int) -> np.ndarray:
    """Boolean vector of the low n bits of a slot mask."""
    m = np.uint64(int(mask))
    return ((m >> np.arange(n, dtype=np.uint64)) & np.uint64(1)).astype(bool)


def even_parity_masks(g, cap_dim: int = 20) -> np.ndarray:
    """All sourceless parity configs as slot bitmasks, via the cycle space.

    Builds a spanning forest, takes the fundamental cycle of each
    non-tree slot and enumerates all XOR combinations, so graphs far
    beyond the 2^|E| cap are reachable as long as the cycle dimension
    stays small.  Masks come back sorted (uint64, |E| <= 62).
    """
    sg = _as_sitegraph(g)
    E = sg.n_edges
    if E > 62:
        raise ValueError(f"|E| = {E} exceeds the 64-bit mask width")
    n = sg.n_sites
    adj: list[list[tuple[int, int]]] = [[] for _ in range(n)]
    for e, (i, j) in enumerate(sg.slots):
        adj[i].append((j, e))
        adj[j].append((i, e))
    seen = [False] * n
    acc = [0] * n  # XOR of tree-slot bits along the root path
    in_tree = [False] * E
    for s in range(n):
        if seen[s]:
            continue
        seen[s] = True
        stack = [s]
        while stack:
            x = stack.pop()
            for y, e in adj[x]:
                if not seen[y]:
                    seen[y] = True
                    in_tree[e] = True
                    acc[y] = acc[x] ^ (1 << e)
                    stack.append(y)
    basis = [acc[i] ^ acc[j] ^ (1 << e)
             for e, (i, j) in enumerate(sg.slots) if not in_tree[e]]
    if len(basis) > cap_dim:
        raise ValueError(
            f"cycle dimension {len(basis)} exceeds cap {cap_dim}")
    masks = np.zeros(1, dtype=np.uint64)
    for b in basis:
        masks = np.concatenate([masks, masks ^ np.uint64(b)])
    masks.sort()
    return masks


def double_event_probability(g, event: Callable[[int, int, int], float],
                             sources1: Iterable = (), sources2: Iterable = (),
                             t: float = TANH_BC, q2: float = Q_EVEN2,
                             cap: int = 16, positive_only: bool = True
                             ) -> float:
    """Exact P[event] for the trace of a sum of two independent currents.

    `event` maps slot bitmasks (eta1, eta2, positive) to a weight in
    [0, 1].  Both parity laws are enumerated and the positivity
    sprinkle on both-even slots is summed explicitly.  With
    `positive_only` the event is memoized on the positivity mask.
    """
    sg = _as_sitegraph(g)
    E = sg.n_edges
    if E > cap:
        raise ValueError(f"|E| = {E} exceeds double-event cap {cap}")
    t1 = enumerate_parity(sg, sources1, cap=max(cap, 24))
    t2 = enumerate_parity(sg, sources2, cap=max(cap, 24))
    if len(t1) == 0 or len(t2) == 0:
        raise ValueError("sources unrealizable")
    w1 = np.power(float(t), t1.sizes)
    w1 /= w1.sum()
    w2 = np.power(float(t), t2.sizes)
    w2 /= w2.sum()
    # sprinkle weight by (number of even slots, number switched on)
    pw = np.zeros((E + 1, E + 1))
    for ne in range(E + 1):
        for k in range(ne + 1):
            pw[ne, k] = (q2 ** k) * ((1.0 - q2) ** (ne - k))
    full = (1 << E) - 1
    memo: dict[int, float] = {}
    total = 0.0
    for m1, p1 in zip(t1.masks, w1):
        m1 = int(m1)
        for m2, p2 in zip(t2.masks, w2):
            m2 = int(m2)
            odd = m1 | m2
            comp = full & ~odd
            ne = comp.bit_count()
            acc = 0.0
            sub = comp
            while True:
                pos = odd | sub
                if positive_only:
                    val = memo.get(pos)
                    if val is None:
                        val = float(event(m1, m2, pos))
                        memo[pos] = val
                else:
                    val = float(event(m1, m2, pos))
                if val:
                    acc += pw[ne, sub.bit_count()] * val
                if sub == 0:
                    break
                sub = (sub - 1) & comp
            total += float(p1) * float(p2) * acc
    return total


# ---------------------------------------------------------------------
# component counting over positivity masks


def _components(sg: SiteGraph, vmask: int) -> list[int]:
    """Root per site for the subgraph of positive slots (path-compressed)."""
    parent = list(range(sg.n_sites))

    def find(x):
        while parent[x] != x:
            parent[x] = parent[parent[x]]
            x = parent[x]
        return x

    for e, (i, j) in enumerate(sg.slots):
        if (vmask >> e) & 1:
            ri, rj = find(i), find(j)
            if ri != rj:
                if ri < rj:
                    parent[rj] = ri
                else:
                    parent[ri] = rj
    return [find(i) for i in range(sg.n_sites)]


class _ClusterCounter:
    def __init__(self, sg: SiteGraph):
        self.sg = sg
        self.memo: dict[int, int] = {}

    def __call__(self, vmask: int) -> int:
        out = self.memo.get(vmask)
        if out is None:
            roots = _components(self.sg, vmask)
            out = len(set(roots))
            self.memo[vmask] = out
        return out


class _EvenIntersection:
    """Indicator: every cluster of the positivity graph meets the source
    set in an even number of sites (merged classes count once)."""

    def __init__(self, sg: SiteGraph, a_mask: int):
        self.sg = sg
        self.a = a_mask
        self.memo: dict[int, int] = {}

    def __call__(self, vmask: int) -> int:
        out = self.memo.get(vmask)
        if out is None:
            roots = _components(self.sg, vmask)
            acc: dict[int, int] = {}
            for i, r in enumerate(roots):
                if (self.a >> i) & 1:
                    acc[r] = acc.get(r, 0) ^ 1
            out = 1 if all(v == 0 for v in acc.values()) else 0
            self.memo[vmask] = out
        return out


# ---------------------------------------------------------------------
# functionals of the aggregate trace


@dataclass(frozen=True)
class Functional:
    """A functional of the aggregate trace used in switching checks.

    kind "one": constant 1.  kind "edge": indicator that a fixed edge is
    positive.  kind "clusters": number of clusters of the positive
    subgraph (isolated sites count).  kind "connected": indicator that
    two sites share a cluster.  kind "custom": fn(parity_mask, pos_mask).
    """

    kind: str
    name: str
    edge: tuple | None = None
    pair: tuple | None = None
    fn: Callable | None = None

    @staticmethod
    def one() -> "Functional":
        return Functional("one", "one")

    @staticmethod
    def edge_positive(edge) -> "Functional":
        a, b = edge
        return Functional("edge", f"edge_positive{edge}", edge=canon_edge(tuple(a), tuple(b)))

    @staticmethod
    def cluster_count() -> "Functional":
        return Functional("clusters", "cluster_count")

    @staticmethod
    def connected(u, v) -> "Functional":
        u = tuple(u) if isinstance(u, (list, tuple)) else u
        v = tuple(v) if isinstance(v, (list, tuple)) else v
        return Functional("connected", f"connected{(u, v)}", pair=(u, v))

    @staticmethod
    def custom(name, fn) -> "Functional":
        return Functional("custom", name, fn=fn)


def _make_evaluator(sg: SiteGraph, f: Functional) -> Callable[[int, int], float]:
    if f.kind == "one":
        return lambda p, v: 1
    if f.kind == "edge":
        slot = None
        for k, key in enumerate(sg.keys):
            if key == f.edge:
                slot = k
                break
        if slot is None:
            raise ValueError(f"edge {f.edge} not an effective edge of the graph")
        bit = 1 << slot
        return lambda p, v: 1 if v & bit else 0
    if f.kind == "clusters":
        return lambda p, v, c=_ClusterCounter(sg): c(v)
    if f.kind == "connected":
        iu = sg.site_index(f.pair[0])
        iv = sg.site_index(f.pair[1])
        memo: dict[int, int] = {}

        def ev(p, v):
            out = memo.get(v)
            if out is None:
                roots = _components(sg, v)
                out = 1 if roots[iu] == roots[iv] else 0
                memo[v] = out
            return out

        return ev
    if f.kind == "custom":
        return lambda p, v: f.fn(p, v)
    raise ValueError(f"unknown functional kind {f.kind}")


# ---------------------------------------------------------------------
# pair measures and the switching lemma


class _SprinkleAvg:
    """E over the aggregate positivity sprinkle of g(P, V) given (P, U).

    Even edges of the pair split into two rate classes: edges carried by
    both currents sprinkle at q2 = 1-(1-q)^2, edges carried only by the
    outer current at q.  In exact mode the per-edge positive factors are
    (c^2 - 1) and (c - 1) against 1 for zero, with the global cosh
    normalization already multiplied through.
    """

    def __init__(self, n_edges: int, hmask: int, evaluator, exact: bool):
        self.E = n_edges
        self.h = hmask
        self.eval = evaluator
        self.exact = exact
        self.cache: dict[tuple[int, int], object] = {}
        if exact:
            f_h = AlgNum.c() * AlgNum.c() - 1
            f_g = AlgNum.c() - 1
            self.pow_h = [AlgNum.const(1)]
            self.pow_g = [AlgNum.const(1)]
            for _ in range(n_edges):
                self.pow_h.append(self.pow_h[-1] * f_h)
                self.pow_g.append(self.pow_g[-1] * f_g)
            self.zed_h = [AlgNum.const(1)] * (n_edges + 1)
            self.zed_g = [AlgNum.const(1)] * (n_edges + 1)
        else:
            self.pow_h = [Q_EVEN2 ** k for k in range(n_edges + 1)]
            self.pow_g = [Q_EVEN ** k for k in range(n_edges + 1)]
            self.zed_h = [(1.0 - Q_EVEN2) ** k for k in range(n_edges + 1)]
            self.zed_g = [(1.0 - Q_EVEN) ** k for k in range(n_edges + 1)]

    def value(self, p: int, u: int):
        key = (p, u)
        out = self.cache.get(key)
        if out is not None:
            return out
        comp = ((1 << self.E) - 1) & ~u
        ch = comp & self.h
        cg = comp & ~self.h
        nh = ch.bit_count()
        ng = cg.bit_count()
        tot = AlgNum.const(0) if self.exact else 0.0
        sub = comp
        while True:
            th = (sub & self.h).bit_count()
            tg = (sub & ~self.h).bit_count()
            w = (self.pow_h[th] * self.zed_h[nh - th]
                 * self.pow_g[tg] * self.zed_g[ng - tg])
            fv = self.eval(p, u | sub)
            if self.exact:
                if fv:
                    tot = tot + w * fv
            else:
                tot += w * fv
            if sub == 0:
                break
            sub = (sub - 1) & comp
        self.cache[key] = tot
        return tot


def _slot_map(sg_g: SiteGraph, sg_h: SiteGraph) -> list[int]:
    """G slot index per H slot, matched by slot key; checks containment."""
    keyed = {}
    for k, key in enumerate(sg_g.keys):
        keyed.setdefault(key, []).append(k)
    used: dict = {}
    out = []
    for key in sg_h.keys:
        cands = keyed.get(key)
        if not cands:
            raise ValueError(f"edge {key} of h is not an edge of g")
        n = used.get(key, 0)
        if n >= len(cands):
            raise ValueError(f"multiplicity of {key} larger in h than in g")
        out.append(cands[n])
        used[key] = n + 1
    return out


def _spread_table(n_h: int, hmap: list[int]) -> np.ndarray:
    arr = np.zeros(1 << n_h, dtype=np.int64)
    idx = np.arange(1 << n_h, dtype=np.int64)
    for k, gpos in enumerate(hmap):
        arr |= ((idx >> k) & 1) << gpos
    return arr


@dataclass
class SwitchingReport:
    lhs: float
    rhs: float
    prefactor: float
    residual: float
    exact_equal: bool | None = None


def _switching_setup(g, h, a: Iterable, b: Iterable, cap: int):
    """Shared validation and mask tables for the switching checkers."""
    sg = _as_sitegraph(g)
    sh = _as_sitegraph(h)
    aset = _coerce_labels(a)
    bset = _coerce_labels(b)
    if len(aset) % 2 or len(bset) % 2:
        raise ValueError("source sets must have even cardinality")
    for lab in aset:
        try:
            sg.site_index(lab)  # a must also name sites of g (a^b sources)
        except KeyError:
            raise ValueError(f"source {lab!r} of h is not a site of g") from None
    hmap = _slot_map(sg, sh)
    hmask = 0
    for k in hmap:
        hmask |= 1 << k
    spread = _spread_table(sh.n_edges, hmap)

    groups_g = _parity_groups(sg, cap)
    groups_h = _parity_groups(sh, cap)
    mb = sg.source_mask(bset)
    ma_h = sh.source_mask(aset)
    ma_g = sg.source_mask(aset)
    for m, grp, who in ((mb, groups_g, "b on g"), (ma_h, groups_h, "a on h"),
                        (ma_g ^ mb, groups_g, "a^b on g")):
        if m not in grp:
            raise ValueError(f"sources {who} unrealizable")
    return sg, sh, hmap, hmask, spread, groups_g, groups_h, mb, ma_h, ma_g


def _gated_evaluator(sg: SiteGraph, sh: SiteGraph, hmap: list[int],
                     ma_h: int, ev_f) -> Callable[[int, int], float]:
    """Evaluator for the switched side: zero unless every positivity
    cluster of the h projection meets the a sources evenly."""
    fa = _EvenIntersection(sh, ma_h)

    def ev_f_fa(p, v):
        # project the aggregate positivity to h before the cluster test
        vh = 0
        for k, gpos in enumerate(hmap):
            vh |= ((v >> gpos) & 1) << k
        ind = fa(vh)
        if not ind:
            return 0
        return ev_f(p, v)

    return ev_f_fa


_T2_POWS: list[list[int]] = [[1]]


def _one_minus_t2_pow(j: int) -> list[int]:
    """Coefficients of (1 - t^2)^j over t^{2i}, cached."""
    while len(_T2_POWS) <= j:
        prev = _T2_POWS[-1]
        nxt = [0] * (len(prev) + 1)
        for i, cf in enumerate(prev):
            nxt[i] += cf
            nxt[i + 1] -= cf
        _T2_POWS.append(nxt)
    return _T2_POWS[j]


def switching_exact_equal(g, h, a: Iterable, b: Iterable, f: Functional,
                          cap: int = 24, rhs_weight: int = 1) -> bool:
    """Formal-variable switching check by integer polynomial accounting.

    Both sides are accumulated as A(t, u) + B(t, u) c with c the formal
    inverse-cosh, u = c^2 and u (1 - t^2) = 1.  Since {1, c} is a basis
    over Q(t), the sides agree for every t exactly when both component
    polynomials cancel after clearing (1 - t^2) powers; everything stays
    in integer arithmetic, so this is a fast drop-in for the exact mode
    of verify_switching_lemma.  Functional values must be integers (the
    built-in functionals are).  `rhs_weight` != 1 scales the switched
    side; it exists as a fault hook for the verification suites.
    """
    (sg, sh, hmap, hmask, spread, groups_g, groups_h,
     mb, ma_h, ma_g) = _switching_setup(g, h, a, b, cap)
    ev_f = _make_evaluator(sg, f)
    ev_f_fa = _gated_evaluator(sg, sh, hmap, ma_h, ev_f)

    full = (1 << sg.n_edges) - 1
    joint: dict[tuple[int, int, int, int], int] = {}

    def accumulate(grp1, grp2, ev, sign):
        for m1 in grp1[0]:
            m1 = int(m1)
            for m2 in grp2[0]:
                m2g = int(spread[int(m2)])
                p = m1 ^ m2g
                u = m1 | m2g
                nb = (m1 & m2g).bit_count()
                no = ((m1 ^ m2g) & hmask).bit_count()
                ng = (m1 & ~hmask).bit_count()
                a0 = 2 * nb + no + ng
                cb = 2 * nb + 2 * no + ng
                comp = full & ~u
                sub = comp
                while True:
                    fv = ev(p, u | sub)
                    if fv:
                        iv = int(fv)
                        if iv != fv:
                            raise ValueError(
                                "formal check needs integer functionals")
                        th = (sub & hmask).bit_count()
                        tg = (sub & ~hmask).bit_count()
                        key = (a0, cb, th, tg)
                        joint[key] = joint.get(key, 0) + sign * iv
                    if sub == 0:
                        break
                    sub = (sub - 1) & comp

    accumulate(groups_g[mb], groups_h[ma_h], ev_f, 1)
    accumulate(groups_g[ma_g ^ mb], groups_h[0], ev_f_fa, -int(rhs_weight))

    # expand (u - 1)^th (c - 1)^tg and split by c parity
    acc: tuple[dict, dict] = ({}, {})
    for (a0, cb, th, tg), n in joint.items():
        if n == 0:
            continue
        for j in range(tg + 1):
            cj = math.comb(tg, j) * (-1 if (tg - j) & 1 else 1)
            ctot = cb + j
            m0, par = ctot >> 1, ctot & 1
            d = acc[par]
            for i in range(th + 1):
                ci = math.comb(th, i) * (-1 if (th - i) & 1 else 1)
                key = (a0, m0 + i)
                d[key] = d.get(key, 0) + n * cj * ci

    for d in acc:
        if not d:
            continue
        M = max(m for _, m in d)
        final: dict[int, int] = {}
        for (a0, m), n in d.items():
            if n == 0:
                continue
            for i, cf in enumerate(_one_minus_t2_pow(M - m)):
                key = a0 + 2 * i
                final[key] = final.get(key, 0) + n * cf
        if any(v != 0 for v in final.values()):
            return False
    return True


def verify_switching_lemma(g, h, a: Iterable, b: Iterable, f: Functional,
                           mode: str = "float", cap: int = 24,
                           rhs_scale: float = 1.0) -> SwitchingReport:
    """Check the switching identity for sources b on g and a on h <= g.

    Float mode compares the two cosh-normalized sums at the critical
    point and reports |LHS - RHS| / (Z_b(g) Z_a(h)), which equals the
    defect of the normalized-expectation form.  Exact mode runs the same
    sums in Q(t)[c]/(c^2(1-t^2)-1) and decides equality of coefficients;
    residual 0.0 there means the identity is proven for all t.

    `rhs_scale` multiplies every configuration weight on the switched
    side; values != 1 exist for fault injection in verification suites
    (float mode only).
    """
    if mode == "exact" and rhs_scale != 1.0:
        raise ValueError("rhs_scale is a float-mode fault hook")
    (sg, sh, hmap, hmask, spread, groups_g, groups_h,
     mb, ma_h, ma_g) = _switching_setup(g, h, a, b, cap)

    exact = mode == "exact"
    ev_f = _make_evaluator(sg, f)
    ev_f_fa = _gated_evaluator(sg, sh, hmap, ma_h, ev_f)

    phi_l = _SprinkleAvg(sg.n_edges, hmask, ev_f, exact)
    phi_r = _SprinkleAvg(sg.n_edges, hmask, ev_f_fa, exact)

    if exact:
        t_ = AlgNum.t()
        c_ = AlgNum.c()
        w_both = [(t_ * c_ * t_ * c_) ** k for k in range(sh.n_edges + 1)]
        w_one = [(t_ * c_ * c_) ** k for k in range(sg.n_edges + 1)]
        w_gonly = [(t_ * c_) ** k for k in range(sg.n_edges + 1)]

        def pair_sum(grp1, grp2, phi):
            tot = AlgNum.const(0)
            for m1 in grp1[0]:
                m1 = int(m1)
                for m2 in grp2[0]:
                    m2g = int(spread[int(m2)])
                    both = (m1 & m2g).bit_count()
                    one = ((m1 ^ m2g) & hmask).bit_count()
                    gonly = (m1 & ~hmask).bit_count()
                    w = w_both[both] * w_one[one] * w_gonly[gonly]
                    tot = tot + w * phi.value(m1 ^ m2g, m1 | m2g)
            return tot

        lhs = pair_sum(groups_g[mb], groups_h[ma_h], phi_l)
        rhs = pair_sum(groups_g[ma_g ^ mb], groups_h[0], phi_r)
        diff = lhs - rhs
        equal = diff.is_zero() or lhs == rhs
        resid = 0.0 if equal else abs(diff.evaluate(TANH_BC))
        return SwitchingReport(lhs.evaluate(TANH_BC), rhs.evaluate(TANH_BC),
                               float("nan"), resid, exact_equal=equal)

    t = TANH_BC
    tp = [t ** k for k in range(sg.n_edges + sh.n_edges + 1)]

    def pair_sum(grp1, grp2, phi):
        tot = 0.0
        for m1, s1 in zip(grp1[0], grp1[1]):
            m1 = int(m1)
            for m2, s2 in zip(grp2[0], grp2[1]):
                m2g = int(spread[int(m2)])
                tot += tp[int(s1) + int(s2)] * phi.value(m1 ^ m2g, m1 | m2g)
        return tot

    lhs = pair_sum(groups_g[mb], groups_h[ma_h], phi_l)
    rhs = pair_sum(groups_g[ma_g ^ mb], groups_h[0], phi_r) * rhs_scale
    zb = float(np.sum(np.power(t, groups_g[mb][1])))
    za = float(np.sum(np.power(t, groups_h[ma_h][1])))
    zab = float(np.sum(np.power(t, groups_g[ma_g ^ mb][1])))
    z0h = float(np.sum(np.power(t, groups_h[0][1])))
    z0g = float(np.sum(np.power(t, groups_g[0][1])))
    pref = (zab / z0g) / ((zb / z0g) * (za / z0h))
    return SwitchingReport(lhs / (zb * za), rhs / (zab * z0h), pref,
                           abs(lhs - rhs) / (zb * za))


def pair_expectation(g, h, b: Iterable, a: Iterable, f: Functional,
                     cap: int = 24) -> float:
    """E[f(n1+n2)] for independent currents with sources b on g, a on h."""
    sg = _as_sitegraph(g)
    sh = _as_sitegraph(h)
    hmap = _slot_map(sg, sh)
    hmask = 0
    for k in hmap:
        hmask |= 1 << k
    spread = _spread_table(sh.n_edges, hmap)
    groups_g = _parity_groups(sg, cap)
    groups_h = _parity_groups(sh, cap)
    mb = sg.source_mask(_coerce_labels(b))
    ma = sh.source_mask(_coerce_labels(a))
    if mb not in groups_g or ma not in groups_h:
        raise ValueError("sources unrealizable")
    phi = _SprinkleAvg(sg.n_edges, hmask, _make_evaluator(sg, f), False)
    t = TANH_BC
    tot = 0.0
    for m1, s1 in zip(*groups_g[mb]):
        m1 = int(m1)
        for m2, s2 in zip(*groups_h[ma]):
            m2g = int(spread[int(m2)])
            tot += (t ** int(s1 + s2)) * phi.value(m1 ^ m2g, m1 | m2g)
    zb = float(np.sum(np.power(t, groups_g[mb][1])))
    za = float(np.sum(np.power(t, groups_h[ma][1])))
    return tot / (zb * za)


def double_connectivity_exact(g, u, v, cap: int = 24) -> float:
    """P[u connected to v in the sourceless double current]."""
    return pair_expectation(g, g, (), (), Functional.connected(u, v), cap)


# ---------------------------------------------------------------------
# switching principle on explicit multigraphs


@dataclass
class PrincipleReport:
    lhs: float
    rhs: float
    residual: float
    k_mask: int


def canonical_k(mg: SiteGraph, a: Iterable, cap: int = 20) -> int:
    """Smallest (as a slot bitmask) sub-multigraph with sources a."""
    if mg.n_edges > cap:
        raise ValueError(f"total multiplicity {mg.n_edges} exceeds cap {cap}")
    ma = mg.source_mask(_coerce_labels(a))
    groups = _parity_groups(mg, cap)
    if ma not in groups:
        raise ValueError("unswitchable: no sub-multigraph with these sources")
    return int(groups[ma][0][0])


def verify_switching_principle(mg: SiteGraph, a: Iterable,
                               f: Callable[[int], float],
                               cap: int = 20) -> PrincipleReport:
    """Check sum_{N <= M, dN = a} f(N) = sum_{N <= M, dN = 0} f(N xor K).

    M is the multigraph `mg` with one slot per parallel copy; f takes a
    slot bitmask.  K is the canonical smallest switchable mask.
    """
    kmask = canonical_k(mg, a, cap)
    groups = _parity_groups(mg, cap)
    ma = mg.source_mask(_coerce_labels(a))
    lhs = 0.0
    for m in groups[ma][0]:
        lhs += f(int(m))
    rhs = 0.0
    if 0 in groups:
        for m in groups[0][0]:
            rhs += f(int(m) ^ kmask)
    return PrincipleReport(lhs, rhs, abs(lhs - rhs), kmask)


# ---------------------------------------------------------------------
# flux parity


def dual_path(g: DomainGraph, f_from, f_to) -> list[int]:
    """Graph edges crossed by a deterministic plane path between faces."""
    return FaceGrid(g).path(f_from, f_to)


def flux_parity(parity_mask: int, path_edges: Iterable[int]) -> int:
    """Parity of the current flux across a dual path (XOR of parity bits)."""
    out = 0
    for e in path_edges:
        out ^= (parity_mask >> e) & 1
    return out


@dataclass
class FluxHalfReport:
    max_residual: float
    qualifying_classes: int
    total_classes: int
    path: tuple


def verify_flux_half(g: DomainGraph, u_face, v_face, cap: int = 14) -> FluxHalfReport:
    """On qualifying aggregates, P[n1-flux between u and v is odd] = 1/2.

    Qualifying means the positive part of the aggregate trace separates
    face u from face v in the plane (so a positive circuit surrounds
    exactly one of them).  The conditional is computed from the exact
    sourceless pair table.
    """
    if g.merges:
        raise ValueError("flux geometry needs an unmerged planar graph")
    sg = SiteGraph.from_domain(g)
    E = sg.n_edges
    if E > cap:
        raise ValueError(f"|E| = {E} exceeds flux table cap {cap}")
    fg = FaceGrid(g)
    path = fg.path(u_face, v_face)
    pmask = 0
    for e in path:
        pmask |= 1 << e
    groups = _parity_groups(sg, max(cap, 24))
    if 0 not in groups:
        raise ValueError("no sourceless parity configs?")
    masks = [int(m) for m in groups[0][0]]
    sizes = [int(s) for s in groups[0][1]]
    t = TANH_BC
    full = (1 << E) - 1
    acc: dict[tuple[int, int], list[float]] = {}
    for m1, s1 in zip(masks, sizes):
        fo = (m1 & pmask).bit_count() & 1
        for m2, s2 in zip(masks, sizes):
            base = t ** (s1 + s2)
            u = m1 | m2
            p = m1 ^ m2
            comp = full & ~u
            sub = comp
            while True:
                k = sub.bit_count()
                w = base * (Q_EVEN2 ** k) * ((1 - Q_EVEN2) ** (comp.bit_count() - k))
                cell = acc.setdefault((p, u | sub), [0.0, 0.0])
                cell[0] += w
                cell[1] += w * fo
                if sub == 0:
                    break
                sub = (sub - 1) & comp

    disc_memo: dict[int, bool] = {}

    def disconnected(v: int) -> bool:
        out = disc_memo.get(v)
        if out is None:
            blocked = np.array([(v >> e) & 1 == 1 for e in range(E)])
            out = not fg.connected(u_face, v_face, blocked)
            disc_memo[v] = out
        return out

    worst = 0.0
    nq = 0
    for (p, v), (tot, odd) in acc.items():
        if disconnected(v):
            nq += 1
            worst = max(worst, abs(odd / tot - 0.5))
    return FluxHalfReport(worst, nq, len(acc), tuple(path))


# ---------------------------------------------------------------------
# FK enumeration and the F_B identity


def fk_event_probability(g, event: Callable[[int], float], p: float = P_C,
                         qclusters: float = 2.0, cap: int = 16) -> float:
    """E[event(omega)] under the free-b.c. random cluster model."""
    sg = _as_sitegraph(g)
    E = sg.n_edges
    if E > cap:
        raise ValueError(f"|E| = {E} exceeds FK enumeration cap {cap}")
    counter = _ClusterCounter(sg)
    num = 0.0
    den = 0.0
    for m in range(1 << E):
        k = counter(m)
        w = (qclusters ** k) * (p ** m.bit_count()) * ((1 - p) ** (E - m.bit_count()))
        den += w
        ev = event(m)
        if ev:
            num += w * ev
    return num / den


def fk_edge_marginals(g, p: float = P_C, cap: int = 16) -> np.ndarray:
    sg = _as_sitegraph(g)
    out = np.empty(sg.n_edges)
    for e in range(sg.n_edges):
        out[e] = fk_event_probability(sg, lambda m, e=e: (m >> e) & 1, p, cap=cap)
    return out


def fk_coupling_residual(g, cap: int = 8) -> float:
    """TV distance between (positivity + sprinkle) and the FK measure.

    The positive part of a sourceless current's trace, thickened by an
    independent Bernoulli(1 - sqrt(1 - p_c)) sprinkle on the remaining
    edges, is distributed as the free random cluster configuration at
    p_c.  Exact computation; returns the total variation defect.
    """
    from .constants import FK_SPRINKLE
    sg = _as_sitegraph(g)
    E = sg.n_edges
    if E > cap:
        raise ValueError(f"|E| = {E} exceeds coupling cap {cap}")
    counter = _ClusterCounter(sg)
    fkw = np.zeros(1 << E)
    for m in range(1 << E):
        k = m.bit_count()
        fkw[m] = (2.0 ** counter(m)) * (P_C ** k) * ((1 - P_C) ** (E - k))
    fkw /= fkw.sum()
    tab = trace_distribution_exact(sg, (), cap=max(cap, 14))
    out = np.zeros(1 << E)
    s = FK_SPRINKLE
    for vm, pr in zip(tab.positive, tab.prob):
        base = int(vm)
        comp = ((1 << E) - 1) & ~base
        sub = comp
        while True:
            k = sub.bit_count()
            out[base | sub] += float(pr) * (s ** k) * ((1 - s) ** (comp.bit_count() - k))
            if sub == 0:
                break
            sub = (sub - 1) & comp
    return 0.5 * float(np.abs(out - fkw).sum())


def fb_identity_residual(g, b: Iterable, cap: int = 16) -> float:
    """| <sigma_B> - phi[every cluster meets B evenly] | on small graphs."""
    sg = _as_sitegraph(g)
    bset = _coerce_labels(b)
    corr = correlation_exact(sg, bset)
    fb = _EvenIntersection(sg, sg.source_mask(bset))
    prob = fk_event_probability(sg, fb, cap=cap)
    return abs(corr - prob)


# ---------------------------------------------------------------------
# parity reduction validation


def validate_parity_reduction(beta: float, cap: int = 30,
                              path_edges: int = 3) -> dict:
    """Check the parity reduction against truncated integer-current sums.

    On a path multigraph, for every parity pattern eta the truncated sum
    of prod beta^(n_e)/n_e! over currents with that parity must equal
    cosh(beta)^|E| tanh(beta)^|eta|, and conditionally on eta the
    positivity indicators must factorize with per-edge rate
    q = 1 - 1/cosh(beta).  Returns the residual summary.
    """
    even_terms = [beta ** k / math.factorial(k) for k in range(0, cap + 1, 2)]
    odd_terms = [beta ** k / math.factorial(k) for k in range(1, cap + 1, 2)]
    even_sum = math.fsum(even_terms)
    odd_sum = math.fsum(odd_terms)
    even_pos = even_sum - 1.0  # n_e even and > 0

    r_parity = 0.0
    r_factor = 0.0
    ch, sh = math.cosh(beta), math.sinh(beta)
    for eta in range(1 << path_edges):
        target = 1.0
        for e in range(path_edges):
            target *= sh if (eta >> e) & 1 else ch
        series = 1.0
        for e in range(path_edges):
            series *= odd_sum if (eta >> e) & 1 else even_sum
        scale = max(abs(target), 1e-300)
        r_parity = max(r_parity, abs(series - target) / scale)
        # positivity factorization on the even edges of this pattern
        evens = [e for e in range(path_edges) if not (eta >> e) & 1]
        for pos in range(1 << len(evens)):
            series_p = 1.0
            target_p = 1.0
            for k, e in enumerate(evens):
                if (pos >> k) & 1:
                    series_p *= even_pos
                    target_p *= even_sum * (1.0 - 1.0 / ch) if ch != 1.0 else 0.0
                else:
                    series_p *= 1.0
                    target_p *= even_sum * (1.0 / ch)
            scale = max(abs(series_p), abs(target_p), 1e-300)
            r_factor = max(r_factor, abs(series_p - target_p) / scale)

    q_closed = 1.0 - 1.0 / ch
    q_series = even_pos / even_sum
    return {
        "beta": beta,
        "per_parity_max_residual": r_parity,
        "factorization_max_residual": r_factor,
        "q_even_closed": q_closed,
        "q_even_series": q_series,
        "q_even_residual": abs(q_closed - q_series),
    }


# ---------------------------------------------------------------------
# corpora


def connected_induced_subgraphs(g: DomainGraph, min_vertices: int = 1
                                ) -> list[DomainGraph]:
    """All connected vertex-induced subgraphs, in deterministic order."""
    vl = g.vertex_list()
    n = len(vl)
    if n > 16:
        raise ValueError("corpus generator meant for small graphs")
    out = []
    for mask in range(1, 1 << n):
        vs = [vl[i] for i in range(n) if (mask >> i) & 1]
        if len(vs) < min_vertices:
            continue
        sub = domain_from_vertices(vs)
        if sub.is_connected():
            out.append(sub)
    return out


def even_subsets(labels: Iterable, max_size: int = 4) -> list[frozenset]:
    """All even-cardinality subsets up to max_size, deterministic order."""
    labels = sorted(_coerce_labels(labels))
    n = len(labels)
    out = [frozenset()]
    for mask in range(1, 1 << n):
        k = mask.bit_count()
        if k % 2 == 0 and k <= max_size:
            out.append(frozenset(labels[i] for i in range(n) if (mask >> i) & 1))
    return out
