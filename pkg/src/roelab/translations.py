"""Greedy partition of a distance band into graphs of partial translations."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .operators import SpaceOperator
from .spaces import FiniteMetricSpace, growth


@dataclass
class PartialTranslation:
    """Injective partial map on point ids, stored as its graph {x: y}."""

    pairs: dict

    @property
    def dom(self):
        return set(self.pairs.keys())

    @property
    def ran(self):
        return set(self.pairs.values())

    def graph(self):
        return sorted(self.pairs.items())


@dataclass
class TranslationDecomposition:
    space: FiniteMetricSpace
    R: float
    parts: list

    def to_json(self) -> dict:
        return {
            "R": float(self.R),
            "parts": [{"pairs": [[int(x), int(y)] for x, y in p.graph()]} for p in self.parts],
        }


def decompose_band(space: FiniteMetricSpace, R) -> TranslationDecomposition:
    """Partition {(x,y): dist(x,y) <= R} into <= 2 N_X(R) partial-translation graphs.

    Greedy first-fit in lexicographic pair order; a pair (x, y) joins the first
    part whose domain misses x and whose range misses y. The pigeonhole count
    guarantees the cap, so exceeding it aborts loudly.
    """
    if R < 0:
        raise ValueError("radius must be nonnegative")
    cap = 2 * growth(space, R)
    xs, ys = np.nonzero(space.dist <= R)  # row-major, i.e. lexicographic by (x, y)
    doms: list[set] = []
    rans: list[set] = []
    parts: list[dict] = []
    for x, y in zip(xs.tolist(), ys.tolist()):
        placed = False
        for i in range(len(parts)):
            if x not in doms[i] and y not in rans[i]:
                parts[i][x] = y
                doms[i].add(x)
                rans[i].add(y)
                placed = True
                break
        if not placed:
            if len(parts) >= cap:
                raise AssertionError(
                    f"band pair ({x},{y}) needs part {len(parts) + 1} > cap {cap}; "
                    "this contradicts the pigeonhole bound and is a bug"
                )
            parts.append({x: y})
            doms.append({x})
            rans.append({y})
    return TranslationDecomposition(
        space=space, R=R, parts=[PartialTranslation(pairs=p) for p in parts]
    )


def schur_restrict(u: SpaceOperator, T: PartialTranslation) -> SpaceOperator:
    """Keep exactly the entries of u on graph(T), zero everywhere else.

    The result is a generalized permutation matrix, so its operator norm is
    the largest kept entry modulus.
    """
    out = np.zeros_like(u.mat)
    for x, y in T.pairs.items():
        out[y, x] = u.mat[y, x]
    return SpaceOperator(space=u.space, mat=out)
