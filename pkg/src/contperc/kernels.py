"""Compiled inner loops: union-find labelling, mark-ordered sweeps, BFS."""

import numpy as np
from numba import njit


@njit(cache=True, nogil=True)
def _find(parent, x):
    root = x
    while parent[root] != root:
        root = parent[root]
    while parent[x] != root:
        nxt = parent[x]
        parent[x] = root
        x = nxt
    return root


@njit(cache=True, nogil=True)
def _union(parent, size, a, b):
    ra = _find(parent, a)
    rb = _find(parent, b)
    if ra == rb:
        return ra
    if size[ra] < size[rb]:
        ra, rb = rb, ra
    parent[rb] = ra
    size[ra] += size[rb]
    return ra


@njit(cache=True, nogil=True)
def component_labels(n, ei, ej):
    """Label ``n`` vertices by the smallest vertex id in their component."""
    parent = np.arange(n)
    size = np.ones(n, dtype=np.int64)
    for k in range(len(ei)):
        _union(parent, size, ei[k], ej[k])
    smallest = np.full(n, n, dtype=np.int64)
    for i in range(n):
        r = _find(parent, i)
        if i < smallest[r]:
            smallest[r] = i
    labels = np.empty(n, dtype=np.int64)
    for i in range(n):
        labels[i] = smallest[_find(parent, i)]
    return labels


@njit(cache=True, nogil=True)
def sweep_flag_counts(order, indptr, indices, flags, cuts):
    """Add points in ``order`` and track clusters whose flags OR to 3.

    ``flags`` holds two bits per point (touches region A, touches region B).
    After the first ``cuts[g]`` points of ``order`` are active, ``counts[g]`` is
    the number of clusters carrying both bits.  ``first`` is the position in
    ``order`` at which that number first became positive (-1 if never).
    ``cuts`` must be non-decreasing.
    """
    n = len(flags)
    parent = np.arange(n)
    size = np.ones(n, dtype=np.int64)
    fl = flags.copy()
    active = np.zeros(n, dtype=np.bool_)
    counts = np.zeros(len(cuts), dtype=np.int64)
    n_both = 0
    first = -1
    g = 0
    while g < len(cuts) and cuts[g] == 0:
        g += 1
    for k in range(len(order)):
        i = order[k]
        active[i] = True
        if fl[i] == 3:
            n_both += 1
        for e in range(indptr[i], indptr[i + 1]):
            j = indices[e]
            if not active[j]:
                continue
            ri = _find(parent, i)
            rj = _find(parent, j)
            if ri == rj:
                continue
            before = (1 if fl[ri] == 3 else 0) + (1 if fl[rj] == 3 else 0)
            merged = fl[ri] | fl[rj]
            r = _union(parent, size, ri, rj)
            fl[r] = merged
            n_both += (1 if merged == 3 else 0) - before
        if n_both > 0 and first < 0:
            first = k
        while g < len(cuts) and cuts[g] == k + 1:
            counts[g] = n_both
            g += 1
    return counts, first


@njit(cache=True, nogil=True)
def bfs_hops(indptr, indices, sources, allowed, max_depth):
    """Hop distance from the nearest source; -1 where unreached.

    Only vertices with ``allowed[v]`` are entered.  ``max_depth < 0`` means
    unbounded.
    """
    n = len(indptr) - 1
    dist = np.full(n, -1, dtype=np.int64)
    queue = np.empty(n, dtype=np.int64)
    head = 0
    tail = 0
    for s in sources:
        if allowed[s] and dist[s] < 0:
            dist[s] = 0
            queue[tail] = s
            tail += 1
    while head < tail:
        v = queue[head]
        head += 1
        if max_depth >= 0 and dist[v] >= max_depth:
            continue
        for e in range(indptr[v], indptr[v + 1]):
            w = indices[e]
            if allowed[w] and dist[w] < 0:
                dist[w] = dist[v] + 1
                queue[tail] = w
                tail += 1
    return dist
