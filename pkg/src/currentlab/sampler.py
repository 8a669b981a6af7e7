"""Samplers for critical currents, their traces, and coupled FK configs.

Single currents on hole-free domains come from the dual route: a
critical Ising model on the inner faces, with the unbounded face carved
into fixed-sign boundary slots along the outer walk.  An edge is odd
exactly where the two adjacent signs disagree, which yields the t^|eta|
law on parity configs with the prescribed boundary sources.  Positivity
on even edges is an independent sprinkle.

The construction is self-checking: at start-up the all-plus inner
configuration must produce exactly the requested sources, otherwise the
chain refuses to run.

Spin/FK sampling on general (possibly merged, non-planar) site graphs
uses plain Swendsen-Wang on the effective multigraph instead.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from . import _kernels
from .constants import FK_SPRINKLE, P_C, Q_EVEN, Q_EVEN2, TANH_BC
from .lattice import DomainGraph, DualGraph, canon_edge, dual_of
from .oracle import SiteGraph

DEFAULT_BURN_IN = 64


def as_generator(seed) -> np.random.Generator:
    if isinstance(seed, np.random.Generator):
        return seed
    return np.random.default_rng(seed)


def spawn_generators(seed, n: int) -> list[np.random.Generator]:
    """Independent child generators for parallel chains."""
    if isinstance(seed, np.random.Generator):
        return list(seed.spawn(n))
    ss = seed if isinstance(seed, np.random.SeedSequence) \
        else np.random.SeedSequence(seed)
    return [np.random.default_rng(c) for c in ss.spawn(n)]


# ---------------------------------------------------------------------
# traces


@dataclass
class CurrentTrace:
    """Trace of one current: parity and positivity per edge."""

    graph: DomainGraph
    eta: np.ndarray
    positive: np.ndarray
    sources: frozenset

    def __post_init__(self):
        assert self.eta.dtype == bool and self.positive.dtype == bool


@dataclass
class DoubleTrace:
    """Aggregate trace of two independent currents.

    eta1/eta2 are the parity vectors; `positive` is the positivity of
    the sum n1 + n2 (odd edges are always positive, both-even edges
    sprinkle at q2 = 1 - (1 - q)^2).
    """

    graph: DomainGraph
    eta1: np.ndarray
    eta2: np.ndarray
    positive: np.ndarray
    sources1: frozenset = frozenset()
    sources2: frozenset = frozenset()

    @property
    def agg_parity(self) -> np.ndarray:
        return self.eta1 ^ self.eta2


def sprinkle_even(eta: np.ndarray, rng, q: float = Q_EVEN) -> np.ndarray:
    """Positivity given parity: odd edges positive, even at rate q."""
    return eta | (np.asarray(rng.random(eta.shape[0])) < q)


def sources_of(g: DomainGraph, eta: np.ndarray) -> frozenset:
    """Vertices with odd eta-degree."""
    deg = np.zeros(g.n_vertices, dtype=np.int64)
    sel = np.nonzero(eta)[0]
    np.add.at(deg, g.edge_u[sel], 1)
    np.add.at(deg, g.edge_v[sel], 1)
    odd = np.nonzero(deg % 2)[0]
    return frozenset((int(x), int(y)) for x, y in g.verts[odd])


# ---------------------------------------------------------------------
# dual-route single current chain


class DualIsingChain:
    """Markov chain on parity configs of a hole-free domain.

    Sources must be boundary vertices (even count).  State is the spin
    vector on inner faces plus two pinned sites for the boundary slot
    signs; Swendsen-Wang sweeps keep pinned clusters fixed, which is the
    correct conditional update.
    """

    def __init__(self, g: DomainGraph, sources=(), seed=None):
        if g.merges:
            raise ValueError("dual-route sampler needs an unmerged domain")
        if not g.is_connected():
            raise ValueError("graph must be connected")
        if g.n_edges == 0:
            raise ValueError("graph has no edges")
        self.graph = g
        self.rng = as_generator(seed)
        srcs = frozenset(tuple(v) for v in sources)
        if len(srcs) % 2:
            raise ValueError("source set must have even cardinality")
        bset = {(int(x), int(y)) for x, y in g.verts[g.boundary_indices()]}
        inside = [v for v in srcs if v not in bset]
        if inside:
            raise ValueError(
                f"sources must lie on the boundary; interior: {sorted(inside)}")
        self.sources = srcs

        dg = dual_of(g)
        n_inner = int(dg.inner.sum())
        if n_inner != g.n_edges - g.n_vertices + 1:
            raise ValueError(
                "domain has non-square bounded faces (holes); the dual "
                "route cannot represent its currents")
        inner_ids = np.where(dg.inner, np.cumsum(dg.inner) - 1, -1)
        self.n_inner = n_inner
        site_plus = n_inner
        site_minus = n_inner + 1

        walk = g.outer_walk()
        signs = self._slot_signs(walk, srcs)

        # per edge, the site on each side: inner face id or a pin site
        side_a = inner_ids[dg.edge_face_a]
        side_b = inner_ids[dg.edge_face_b]
        walk_edges = g.edge_indices(walk)
        for e, s in zip(walk_edges, signs):
            pin = site_plus if s > 0 else site_minus
            if side_a[e] < 0:
                side_a[e] = pin
            elif side_b[e] < 0:
                side_b[e] = pin
            else:
                raise RuntimeError("edge with more than two outer sides")
        if np.any(side_a < 0) or np.any(side_b < 0):
            raise RuntimeError("unassigned edge side in dual construction")

        self.side_a = side_a
        self.side_b = side_b
        n_sites = n_inner + 2
        self.pinned = np.zeros(n_sites, dtype=np.int8)
        self.pinned[site_plus] = 1
        self.pinned[site_minus] = -1
        self.spins = np.where(
            np.asarray(self.rng.random(n_sites)) < 0.5, 1, -1).astype(np.int8)
        self.spins[site_plus] = 1
        self.spins[site_minus] = -1

        # sweep only edges with at least one free endpoint
        dyn = (side_a < n_inner) | (side_b < n_inner)
        self._dyn_u = side_a[dyn].astype(np.int64)
        self._dyn_v = side_b[dyn].astype(np.int64)
        self._parent = np.empty(n_sites, dtype=np.int64)
        self._pinroot = np.empty(n_sites, dtype=np.int8)
        self._erand = np.empty(len(self._dyn_u))
        self._srand = np.empty(n_sites)
        self.sweeps_done = 0

        # the construction must realize exactly the requested sources
        probe = np.ones(n_sites, dtype=np.int8)
        probe[site_minus] = -1
        eta0 = probe[side_a] != probe[side_b]
        got = sources_of(g, eta0)
        if got != srcs:
            raise RuntimeError(
                f"boundary slot signs realize sources {sorted(got)} "
                f"instead of {sorted(srcs)}")

    @staticmethod
    def _slot_signs(walk, sources) -> np.ndarray:
        """Fixed sign per outer-walk slot: flip after the first arrival
        at each source vertex."""
        signs = np.empty(len(walk), dtype=np.int8)
        sign = 1
        seen = set()
        for i, (v, w) in enumerate(walk):
            signs[i] = sign
            if w in sources and w not in seen:
                seen.add(w)
                sign = -sign
        return signs

    def sweep(self, n: int = 1):
        p = P_C  # 1 - exp(-2 beta_c), self-dual
        for _ in range(n):
            self.rng.random(out=self._erand)
            self.rng.random(out=self._srand)
            _kernels.sw_sweep(self._dyn_u, self._dyn_v, self.pinned,
                              self.spins, p, self._erand, self._srand,
                              self._parent, self._pinroot)
        self.sweeps_done += n

    def eta(self) -> np.ndarray:
        return self.spins[self.side_a] != self.spins[self.side_b]

    def current_trace(self) -> CurrentTrace:
        eta = self.eta()
        return CurrentTrace(self.graph, eta, sprinkle_even(eta, self.rng),
                            self.sources)


def sample_current(g: DomainGraph, sources=(), seed=None,
                   sweeps: int = DEFAULT_BURN_IN) -> CurrentTrace:
    """One current trace after a fresh burn-in."""
    chain = DualIsingChain(g, sources, seed)
    chain.sweep(sweeps)
    return chain.current_trace()


class DoubleChain:
    """Two independent current chains on the same graph."""

    def __init__(self, g: DomainGraph, sources1=(), sources2=(), seed=None):
        r1, r2, self.rng = spawn_generators(seed, 3)
        self.c1 = DualIsingChain(g, sources1, r1)
        self.c2 = DualIsingChain(g, sources2, r2)
        self.graph = g

    def sweep(self, n: int = 1):
        self.c1.sweep(n)
        self.c2.sweep(n)

    def double_trace(self) -> DoubleTrace:
        e1 = self.c1.eta()
        e2 = self.c2.eta()
        odd = e1 | e2
        pos = odd | (np.asarray(self.rng.random(len(odd))) < Q_EVEN2)
        return DoubleTrace(self.graph, e1, e2, pos,
                           self.c1.sources, self.c2.sources)


def double_current(g: DomainGraph, sources1=(), sources2=(), seed=None,
                   sweeps: int = DEFAULT_BURN_IN) -> DoubleTrace:
    chain = DoubleChain(g, sources1, sources2, seed)
    chain.sweep(sweeps)
    return chain.double_trace()


# ---------------------------------------------------------------------
# current -> FK -> spins couplings


def fk_from_current(trace, rng) -> np.ndarray:
    """FK configuration coupled to a sourceless trace.

    Opens every positive edge plus an independent sprinkle at rate
    1 - sqrt(1 - p_c) on the rest; the result follows the free random
    cluster law at p_c.  Works for single and double traces.
    """
    pos = trace.positive
    return pos | (np.asarray(rng.random(len(pos))) < FK_SPRINKLE)


def sample_fk(g, seed=None, sweeps: int = DEFAULT_BURN_IN) -> np.ndarray:
    """One free-boundary critical FK bond configuration, sampled directly
    by a Swendsen-Wang chain (no current in the loop; reference law for
    cross-checking `fk_from_current`)."""
    chain = SpinFkChain(g, seed)
    chain.sweep(sweeps)
    return chain.bonds()


def cluster_labels_of(g: DomainGraph, open_edges: np.ndarray) -> np.ndarray:
    """Canonical cluster label per vertex (minimum member index)."""
    parent = np.empty(g.n_vertices, dtype=np.int64)
    sel = np.nonzero(open_edges)[0]
    _kernels.union_labels(g.n_vertices, g.edge_u[sel].astype(np.int64),
                          g.edge_v[sel].astype(np.int64), parent)
    return parent


def es_spins(n_sites: int, labels: np.ndarray, rng,
             forced: dict[int, int] | None = None) -> np.ndarray:
    """Uniform cluster spins given FK labels (Edwards-Sokal).

    `forced` maps a site index to a required value; its whole cluster
    follows.
    """
    flip = np.where(np.asarray(rng.random(n_sites)) < 0.5, 1, -1).astype(np.int8)
    spins = flip[labels]
    if forced:
        for i, v in forced.items():
            spins[labels == labels[i]] = v
    return spins


# ---------------------------------------------------------------------
# spin/FK chain on general site graphs


class SpinFkChain:
    """Swendsen-Wang chain for the critical Ising / FK pair on a site
    multigraph (merged domains welcome; planarity not required)."""

    def __init__(self, g, seed=None):
        sg = g if isinstance(g, SiteGraph) else SiteGraph.from_domain(g)
        self.sitegraph = sg
        self.rng = as_generator(seed)
        self._u = np.asarray([a for a, _ in sg.slots], dtype=np.int64)
        self._v = np.asarray([b for _, b in sg.slots], dtype=np.int64)
        n = sg.n_sites
        self.spins = np.where(
            np.asarray(self.rng.random(n)) < 0.5, 1, -1).astype(np.int8)
        self.pinned = np.zeros(n, dtype=np.int8)
        self._parent = np.empty(n, dtype=np.int64)
        self._pinroot = np.empty(n, dtype=np.int8)
        self._erand = np.empty(len(self._u))
        self._srand = np.empty(n)

    def sweep(self, n: int = 1):
        for _ in range(n):
            self.rng.random(out=self._erand)
            self.rng.random(out=self._srand)
            _kernels.sw_sweep(self._u, self._v, self.pinned, self.spins,
                              P_C, self._erand, self._srand,
                              self._parent, self._pinroot)

    def bonds(self) -> np.ndarray:
        """FK bonds given the current spins (one more half-step)."""
        out = np.empty(len(self._u), dtype=np.bool_)
        self.rng.random(out=self._erand)
        _kernels.bond_step(self._u, self._v, self.spins, P_C,
                           self._erand, out)
        return out

    def bond_labels(self) -> np.ndarray:
        """Cluster label per site under a fresh bond draw."""
        bonds = self.bonds()
        parent = np.empty(self.sitegraph.n_sites, dtype=np.int64)
        sel = np.nonzero(bonds)[0]
        _kernels.union_labels(self.sitegraph.n_sites, self._u[sel],
                              self._v[sel], parent)
        return parent


def every_cluster_even(labels: np.ndarray, b_indices) -> bool:
    """True if each cluster contains an even number of the given sites."""
    counts: dict[int, int] = {}
    for i in b_indices:
        r = int(labels[i])
        counts[r] = counts.get(r, 0) ^ 1
    return all(v == 0 for v in counts.values())
