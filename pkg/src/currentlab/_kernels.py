"""Numba kernels for cluster dynamics and labeling.

Union-find uses path halving with union into the smaller root, so the
final label of every cluster is its minimum site index.  That makes
labels canonical: independent of edge order and stable across runs.
"""

import numpy as np
from numba import njit


@njit(cache=True)
def sw_sweep(ue, ve, pinned, spins, p, edge_rand, site_rand, parent, pinroot):
    """One Swendsen-Wang sweep with optionally pinned sites.

    pinned[i] is 0 for a free site or the forced value (+1/-1).  Bonds
    open with probability p between equal spins; free clusters resample
    uniformly from site_rand at their root, pinned clusters keep the pin.
    Returns nothing; spins and parent are updated in place, and parent
    holds the cluster root per site afterwards.
    """
    n = spins.shape[0]
    for i in range(n):
        parent[i] = i
    m = ue.shape[0]
    for k in range(m):
        if edge_rand[k] < p:
            a = ue[k]
            b = ve[k]
            if spins[a] == spins[b]:
                while parent[a] != a:
                    parent[a] = parent[parent[a]]
                    a = parent[a]
                while parent[b] != b:
                    parent[b] = parent[parent[b]]
                    b = parent[b]
                if a != b:
                    if a < b:
                        parent[b] = a
                    else:
                        parent[a] = b
    for i in range(n):
        pinroot[i] = 0
    for i in range(n):
        if pinned[i] != 0:
            a = i
            while parent[a] != a:
                parent[a] = parent[parent[a]]
                a = parent[a]
            pinroot[a] = pinned[i]
    for i in range(n):
        a = i
        while parent[a] != a:
            parent[a] = parent[parent[a]]
            a = parent[a]
        parent[i] = a
        if pinroot[a] != 0:
            spins[i] = pinroot[a]
        else:
            spins[i] = 1 if site_rand[a] < 0.5 else -1


@njit(cache=True)
def union_labels(n, ea, eb, parent):
    """Cluster label (minimum member index) per site for open edges."""
    for i in range(n):
        parent[i] = i
    m = ea.shape[0]
    for k in range(m):
        a = ea[k]
        b = eb[k]
        while parent[a] != a:
            parent[a] = parent[parent[a]]
            a = parent[a]
        while parent[b] != b:
            parent[b] = parent[parent[b]]
            b = parent[b]
        if a != b:
            if a < b:
                parent[b] = a
            else:
                parent[a] = b
    for i in range(n):
        a = i
        while parent[a] != a:
            parent[a] = parent[parent[a]]
            a = parent[a]
        parent[i] = a


@njit(cache=True)
def bond_step(ue, ve, spins, p, edge_rand, bonds):
    """Sample FK bonds given spins: open agreeing edges with prob p."""
    m = ue.shape[0]
    for k in range(m):
        bonds[k] = edge_rand[k] < p and spins[ue[k]] == spins[ve[k]]


@njit(cache=True)
def bfs_tree(indptr, nbr, eid, seeds, dist, prev_node, prev_edge, queue,
             reverse):
    """Deterministic BFS over a CSR graph from an ordered seed list.

    Neighbors are visited in storage order (reversed when `reverse`),
    so with CSR rows sorted ascending this is the lexicographic
    tie-break.  dist must come in filled with -1; prev_* record the
    discovery tree (node and crossed edge id per reached node).
    """
    head = 0
    tail = 0
    for s in seeds:
        if dist[s] < 0:
            dist[s] = 0
            queue[tail] = s
            tail += 1
    while head < tail:
        a = queue[head]
        head += 1
        lo = indptr[a]
        hi = indptr[a + 1]
        if reverse:
            for k in range(hi - 1, lo - 1, -1):
                b = nbr[k]
                if dist[b] < 0:
                    dist[b] = dist[a] + 1
                    prev_node[b] = a
                    prev_edge[b] = eid[k]
                    queue[tail] = b
                    tail += 1
        else:
            for k in range(lo, hi):
                b = nbr[k]
                if dist[b] < 0:
                    dist[b] = dist[a] + 1
                    prev_node[b] = a
                    prev_edge[b] = eid[k]
                    queue[tail] = b
                    tail += 1
