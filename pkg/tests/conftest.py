import itertools

import numpy as np
import pytest

from roelab.operators import SpaceOperator, _sigma_max
from roelab.spaces import FiniteMetricSpace, from_graph


def random_connected_graph_space(rng, n, extra_edges=None):
    """Connected graph metric: random spanning tree plus extra random edges."""
    adj = np.zeros((n, n), dtype=np.int64)
    order = rng.permutation(n)
    for i in range(1, n):
        a = order[i]
        b = order[rng.integers(0, i)]
        adj[a, b] = adj[b, a] = 1
    if extra_edges is None:
        extra_edges = int(rng.integers(0, n))
    for _ in range(extra_edges):
        a, b = rng.integers(0, n, size=2)
        if a != b:
            adj[a, b] = adj[b, a] = 1
    return from_graph(adj)


def random_operator(rng, space, R=None):
    n = space.n
    m = rng.standard_normal((n, n)) + 1j * rng.standard_normal((n, n))
    if R is not None:
        m = np.where(space.dist <= R, m, 0.0)
    return SpaceOperator(space=space, mat=m)


def floyd_warshall(adjacency):
    """Independent all-pairs shortest paths oracle."""
    n = adjacency.shape[0]
    d = np.where(adjacency > 0, 1.0, np.inf)
    np.fill_diagonal(d, 0.0)
    for k in range(n):
        d = np.minimum(d, d[:, k][:, None] + d[k, :][None, :])
    return d


def eps_propagation_oracle_pairs(u, eps):
    """Brute force over every pair of nonempty subsets: the largest separation
    carried by a rectangle of norm above eps (0.0 if none violates)."""
    space = u.space
    n = space.n
    best = 0.0
    idx = list(range(n))
    for ka in range(1, n + 1):
        for A in itertools.combinations(idx, ka):
            for kb in range(1, n + 1):
                for B in itertools.combinations(idx, kb):
                    value = _sigma_max(u.mat[np.ix_(A, B)])
                    if value > eps:
                        sep = space.dist[np.ix_(A, B)].min()
                        best = max(best, float(sep))
    return best


def eps_propagation_oracle_scan(u, eps):
    """2^|X| oracle: per output set A, linear scan of candidate radii with B the
    complement of the R-neighborhood of A (rectangle norms grow with B)."""
    space = u.space
    n = space.n
    radii = np.unique(space.dist)
    best = 0.0
    for a_mask in range(1, 1 << n):
        A = np.array([i for i in range(n) if a_mask >> i & 1])
        for r in radii:
            B = np.flatnonzero(space.dist[A].min(axis=0) > r)
            if B.size == 0:
                break
            if _sigma_max(u.mat[np.ix_(A, B)]) > eps:
                sep = float(space.dist[np.ix_(A, B)].min())
                best = max(best, sep)
            else:
                break
    return best
