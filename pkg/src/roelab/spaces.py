"""Finite metric spaces: growth data, coarse unions, expander constants.

All spaces are finite with points 0..n-1 and a dense distance matrix.
Graph metrics are integer valued (shortest-path distances); explicit
metrics are float64 and validated to 1e-9.
"""

from __future__ import annotations

import json
from collections import deque
from dataclasses import dataclass, field

import numpy as np

from .errors import (
    DisconnectedGraph,
    EmptySubset,
    GenerationFailed,
    InvalidMetric,
    NonSymmetricInput,
    TooLargeForExact,
)

METRIC_TOL = 1e-9
EXACT_KAPPA_MAX = 22

KAPPA_EXACT = "exact-brute-force"
KAPPA_SPECTRAL = "spectral-lower-bound"
KAPPA_DECLARED = "declared"


@dataclass(frozen=True)
class FiniteMetricSpace:
    """A finite metric space given by its full distance matrix."""

    dist: np.ndarray
    label: str = ""

    def __post_init__(self):
        d = np.asarray(self.dist)
        if d.ndim != 2 or d.shape[0] != d.shape[1]:
            raise InvalidMetric("distance matrix must be square")
        object.__setattr__(self, "dist", d)
        _validate_metric(d)

    @property
    def n(self) -> int:
        return self.dist.shape[0]

    @property
    def is_integer(self) -> bool:
        return np.issubdtype(self.dist.dtype, np.integer)

    @property
    def diameter(self):
        return self.dist.max() if self.n > 0 else 0

    def ball(self, x: int, R) -> np.ndarray:
        """Point ids within distance R of x."""
        return np.flatnonzero(self.dist[x] <= R)

    def neighborhood(self, A, R) -> np.ndarray:
        """Point ids within distance R of the set A."""
        A = np.asarray(A, dtype=int)
        if A.size == 0:
            return A
        return np.flatnonzero(self.dist[A].min(axis=0) <= R)

    def set_distance(self, A, B):
        """min over a in A, b in B of dist(a, b)."""
        A = np.asarray(A, dtype=int)
        B = np.asarray(B, dtype=int)
        if A.size == 0 or B.size == 0:
            raise EmptySubset("set distance needs nonempty subsets")
        return self.dist[np.ix_(A, B)].min()

    def to_json(self) -> dict:
        if self.is_integer:
            kind, data = "graph", self.dist.tolist()
        else:
            kind, data = "explicit", self.dist.tolist()
        return {"label": self.label, "n": self.n, "metric": {"kind": kind, "data": data}}

    @staticmethod
    def from_json(obj: dict) -> "FiniteMetricSpace":
        kind = obj["metric"]["kind"]
        data = np.array(obj["metric"]["data"])
        if kind == "graph":
            data = data.astype(np.int64)
        else:
            data = data.astype(np.float64)
        return FiniteMetricSpace(dist=data, label=obj.get("label", ""))


def _validate_metric(d: np.ndarray) -> None:
    n = d.shape[0]
    if n == 0:
        return
    integer = np.issubdtype(d.dtype, np.integer)
    tol = 0 if integer else METRIC_TOL
    if not np.array_equal(d, d.T) if integer else not np.allclose(d, d.T, atol=tol):
        raise InvalidMetric("distance matrix is not symmetric")
    diag = np.diag(d)
    if np.any(diag != 0) if integer else np.any(np.abs(diag) > tol):
        raise InvalidMetric("nonzero diagonal")
    off = d + np.where(np.eye(n, dtype=bool), np.inf, 0.0)
    if np.any(off <= (0 if integer else tol)):
        raise InvalidMetric("zero or negative distance between distinct points")
    # triangle inequality, one pivot at a time to keep memory at n^2
    for k in range(n):
        via_k = d[:, k][:, None] + d[k, :][None, :]
        if np.any(d > via_k + tol):
            raise InvalidMetric(f"triangle inequality fails through point {k}")


@dataclass
class ExpanderFamily:
    """Ordered list of finite spaces with an expansion constant certificate."""

    members: list
    R0: float
    kappa: float
    kappa_kind: str

    def __post_init__(self):
        sizes = [m.n for m in self.members]
        if any(b <= a for a, b in zip(sizes, sizes[1:])):
            raise InvalidMetric("member sizes must strictly increase")
        if self.kappa_kind != KAPPA_DECLARED and not self.kappa > 1:
            raise InvalidMetric("certified expansion constant must exceed 1")


def from_graph(adjacency: np.ndarray, label: str = "") -> FiniteMetricSpace:
    """Shortest-path metric of a connected simple graph, via BFS from each vertex."""
    a = np.asarray(adjacency)
    n = a.shape[0]
    if a.ndim != 2 or a.shape[1] != n or not np.array_equal(a, a.T):
        raise NonSymmetricInput("adjacency must be a square symmetric 0/1 matrix")
    if np.any(np.diag(a) != 0):
        raise NonSymmetricInput("adjacency must have a zero diagonal")
    neighbors = [np.flatnonzero(a[i]) for i in range(n)]
    dist = np.full((n, n), -1, dtype=np.int64)
    for s in range(n):
        dist[s, s] = 0
        q = deque([s])
        row = dist[s]
        while q:
            v = q.popleft()
            dv = row[v]
            for w in neighbors[v]:
                if row[w] < 0:
                    row[w] = dv + 1
                    q.append(w)
    if np.any(dist < 0):
        raise DisconnectedGraph("graph is not connected")
    return FiniteMetricSpace(dist=dist, label=label)


def growth(space: FiniteMetricSpace, R) -> int:
    """Largest ball cardinality N_X(R) = max_x |{y : dist(x,y) <= R}|."""
    if R < 0:
        raise ValueError("radius must be nonnegative")
    return int((space.dist <= R).sum(axis=1).max())


def coarse_union(members, gap_rule=None, label: str = "") -> FiniteMetricSpace:
    """Disjoint union with inter-piece distances forced above a gap schedule.

    Cross distances depend only on the larger piece index j and equal
    g(j) = max over requested gaps up to j and all diameters up to j,
    which keeps the triangle inequality and makes the gaps nondecreasing.
    The default requested gap between pieces i < j is max(diam_j, 2^j).
    """
    if not members:
        raise ValueError("coarse_union needs at least one member")
    if len(members) == 1:
        return FiniteMetricSpace(dist=members[0].dist.copy(), label=label or members[0].label)
    diams = [m.diameter for m in members]
    if gap_rule is None:
        gap_rule = lambda i, j: max(diams[j], 2 ** j)
    m = len(members)
    g = np.zeros(m)
    for j in range(1, m):
        requested = max(gap_rule(i, j) for i in range(j))
        g[j] = max(g[j - 1], requested, max(diams[: j + 1]))
    integer = all(mm.is_integer for mm in members)
    if integer:
        g = np.ceil(g).astype(np.int64)
    offsets = np.cumsum([0] + [mm.n for mm in members])
    n = offsets[-1]
    dist = np.zeros((n, n), dtype=np.int64 if integer else np.float64)
    for j, mj in enumerate(members):
        sl_j = slice(offsets[j], offsets[j + 1])
        dist[sl_j, sl_j] = mj.dist
        for i in range(j):
            sl_i = slice(offsets[i], offsets[i + 1])
            dist[sl_i, sl_j] = g[j]
            dist[sl_j, sl_i] = g[j]
    return FiniteMetricSpace(dist=dist, label=label or "+".join(mm.label for mm in members))


def piece_slices(members) -> list:
    """Index ranges of each piece inside the coarse union, in order."""
    offsets = np.cumsum([0] + [m.n for m in members])
    return [slice(int(a), int(b)) for a, b in zip(offsets, offsets[1:])]


def _popcount(x: np.ndarray) -> np.ndarray:
    return np.bitwise_count(x)


def expansion_kappa(space: FiniteMetricSpace, R, mode: str = "exact"):
    """Expansion constant at radius R.

    exact: min over nonempty A with |A| <= |X|/2 of |N_R(A)| / |A|,
    by a full subset scan (|X| <= 22).
    spectral: certified lower bound 1 + h/d with h = (d - lambda_2)/2
    from the adjacency spectrum; valid for any R >= 1.
    """
    n = space.n
    if mode == "exact":
        if n > EXACT_KAPPA_MAX:
            raise TooLargeForExact(f"exact expansion scan limited to |X| <= {EXACT_KAPPA_MAX}")
        rows = (space.dist <= R)
        rowmask = np.zeros(n, dtype=np.uint32)
        for b in range(n):
            rowmask[b] = np.uint32(int("".join("1" if v else "0" for v in rows[b][::-1]), 2))
        total = 1 << n
        neigh = np.zeros(total, dtype=np.uint32)
        # removing the lowest set bit leaves a subset whose own lowest bit is
        # strictly higher, so fill in descending bit order
        for b in reversed(range(n)):
            base = (np.arange(1 << (n - b - 1), dtype=np.uint32) << (b + 1))
            neigh[base | np.uint32(1 << b)] = neigh[base] | rowmask[b]
        subsets = np.arange(total, dtype=np.uint32)
        size_a = _popcount(subsets).astype(np.int64)
        size_n = _popcount(neigh).astype(np.int64)
        valid = (size_a > 0) & (2 * size_a <= n)
        ratios = size_n[valid] / size_a[valid]
        return float(ratios.min()), KAPPA_EXACT
    if mode == "spectral":
        adjacency = (space.dist == 1).astype(np.float64)
        deg = adjacency.sum(axis=1)
        d = deg.max()
        if d == 0:
            raise InvalidMetric("space has no unit-distance pairs; no adjacency structure")
        evals = np.linalg.eigvalsh(adjacency)
        lam2 = evals[-2]
        h = (d - lam2) / 2.0
        return float(1.0 + h / d), KAPPA_SPECTRAL
    raise ValueError(f"unknown mode {mode!r}")


def separation_bound(space_n: FiniteMetricSpace, A, B, kappa: float, R0):
    """Check min{|A|,|B|}/|X| <= kappa^(-dist(A,B)/(2 R0))."""
    A = np.asarray(A, dtype=int)
    B = np.asarray(B, dtype=int)
    if A.size == 0 or B.size == 0:
        raise EmptySubset("separation bound needs nonempty subsets")
    if not kappa > 1:
        raise ValueError("separation bound requires kappa > 1")
    n = space_n.n
    lhs = min(A.size / n, B.size / n)
    d_ab = space_n.set_distance(A, B)
    rhs = kappa ** (-float(d_ab) / (2.0 * R0))
    return lhs, rhs, bool(lhs <= rhs + 1e-12)


def random_regular(n: int, d: int, seed: int, label: str = "", max_tries: int = 500) -> FiniteMetricSpace:
    """Connected random d-regular graph via the pairing model with rejection."""
    if n * d % 2 != 0 or d >= n or d < 1:
        raise ValueError("need n*d even and 1 <= d < n")
    rng = np.random.default_rng(seed)
    for _ in range(max_tries):
        stubs = np.repeat(np.arange(n), d)
        rng.shuffle(stubs)
        u, v = stubs[0::2], stubs[1::2]
        if np.any(u == v):
            continue
        lo, hi = np.minimum(u, v), np.maximum(u, v)
        edges = set(zip(lo.tolist(), hi.tolist()))
        if len(edges) < u.size:
            continue
        adjacency = np.zeros((n, n), dtype=np.int64)
        for a, b in edges:
            adjacency[a, b] = adjacency[b, a] = 1
        try:
            space = from_graph(adjacency, label=label or f"rr{n}d{d}s{seed}")
        except DisconnectedGraph:
            continue
        return space
    raise GenerationFailed(f"no connected simple {d}-regular graph on {n} vertices after {max_tries} tries")


def far_points(n: int, separation=10, label: str = "") -> FiniteMetricSpace:
    """n points at mutual distance `separation` (uniform metric)."""
    dist = np.full((n, n), separation, dtype=np.int64)
    np.fill_diagonal(dist, 0)
    return FiniteMetricSpace(dist=dist, label=label or f"far{n}")


def save_space(space: FiniteMetricSpace, path) -> None:
    with open(path, "w") as fh:
        json.dump(space.to_json(), fh)


def load_space(path) -> FiniteMetricSpace:
    with open(path) as fh:
        return FiniteMetricSpace.from_json(json.load(fh))
