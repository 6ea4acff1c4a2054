import numpy as np
from hypothesis import given
from hypothesis import strategies as st
from scipy import sparse
from scipy.sparse import csgraph

from contperc.kernels import bfs_hops, component_labels, sweep_flag_counts


def random_graph(rng, n, p):
    upper = np.triu(rng.random((n, n)) < p, 1)
    adj = sparse.csr_matrix(upper | upper.T)
    return adj


def both_flag_clusters(adj, active, flags):
    """Clusters of the induced subgraph whose members touch both regions."""
    idx = np.flatnonzero(active)
    if idx.size == 0:
        return 0
    _, lab = csgraph.connected_components(adj[idx][:, idx], directed=False)
    count = 0
    for c in np.unique(lab):
        f = np.bitwise_or.reduce(flags[idx[lab == c]])
        count += f == 3
    return count


@given(n=st.integers(1, 40), p=st.floats(0.0, 0.3), seed=st.integers(0, 2**32 - 1))
def test_component_labels_match_scipy(n, p, seed):
    adj = random_graph(np.random.default_rng(seed), n, p)
    ei, ej = sparse.triu(adj).nonzero()
    got = component_labels(n, ei.astype(np.int64), ej.astype(np.int64))
    _, lab = csgraph.connected_components(adj, directed=False)
    for c in np.unique(lab):
        members = np.flatnonzero(lab == c)
        assert np.all(got[members] == members.min())


@given(n=st.integers(1, 40), p=st.floats(0.0, 0.3), seed=st.integers(0, 2**32 - 1))
def test_sweep_counts_match_direct_labelling(n, p, seed):
    rng = np.random.default_rng(seed)
    adj = random_graph(rng, n, p)
    flags = rng.integers(0, 4, n).astype(np.int64)
    order = rng.permutation(n).astype(np.int64)
    cuts = np.sort(rng.integers(0, n + 1, 5)).astype(np.int64)
    counts, first = sweep_flag_counts(order, adj.indptr.astype(np.int64), adj.indices.astype(np.int64), flags, cuts)
    for g, cut in enumerate(cuts):
        active = np.zeros(n, bool)
        active[order[:cut]] = True
        assert counts[g] == both_flag_clusters(adj, active, flags)
    direct = [both_flag_clusters(adj, np.isin(np.arange(n), order[:k + 1]), flags) for k in range(n)]
    want_first = next((k for k, v in enumerate(direct) if v > 0), -1)
    assert first == want_first


@given(n=st.integers(1, 40), p=st.floats(0.0, 0.3), seed=st.integers(0, 2**32 - 1),
       depth=st.integers(-1, 5))
def test_bfs_hops_match_shortest_paths(n, p, seed, depth):
    rng = np.random.default_rng(seed)
    adj = random_graph(rng, n, p)
    allowed = rng.random(n) < 0.8
    sources = rng.choice(n, size=min(n, 2), replace=False).astype(np.int64)
    got = bfs_hops(adj.indptr.astype(np.int64), adj.indices.astype(np.int64), sources, allowed, depth)
    keep = np.flatnonzero(allowed)
    sub = adj[keep][:, keep]
    pos = {v: k for k, v in enumerate(keep)}
    src = [pos[s] for s in sources if allowed[s]]
    want = np.full(n, -1)
    if src:
        d = csgraph.shortest_path(sub, unweighted=True, indices=src, directed=False).min(axis=0)
        for k, v in enumerate(keep):
            if np.isfinite(d[k]) and (depth < 0 or d[k] <= depth):
                want[v] = int(d[k])
    np.testing.assert_array_equal(got, want)
