"""Operators on l2(X): norms, propagation, band truncation, band-distance bounds."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import EmptySubset, TooLargeForExact
from .spaces import FiniteMetricSpace

ZERO_TOL = 1e-9
EXACT_EPSPROP_MAX = 20

_PI_TOL = 1e-11
_PI_MAXITER = 10_000


def operator_norm(mat: np.ndarray) -> float:
    """Largest singular value.

    Power iteration on the Hermitian square with a residual stopping rule;
    matrices with a side of length <= 2 go through the exact eigenvalue
    formula instead. Near-degenerate leading singular values can stall the
    iteration, in which case the exact Hermitian eigensolver takes over.
    """
    m = np.atleast_2d(np.asarray(mat))
    if m.size == 0:
        return 0.0
    if m.shape[0] > m.shape[1]:
        m = m.conj().T
    a = m @ m.conj().T  # smaller Hermitian square
    k = a.shape[0]
    if k <= 2:
        lam = float(np.linalg.eigvalsh(a)[-1])
        return math.sqrt(max(lam, 0.0))
    scale = np.abs(a).max()
    if scale == 0.0:
        return 0.0
    rng = np.random.default_rng(0x5EED)
    v = rng.standard_normal(k) + 1j * rng.standard_normal(k)
    v /= np.linalg.norm(v)
    lam = 0.0
    for _ in range(_PI_MAXITER):
        w = a @ v
        lam = float(np.real(np.vdot(v, w)))
        residual = np.linalg.norm(w - lam * v)
        if residual <= _PI_TOL * max(1.0, abs(lam)):
            return math.sqrt(max(lam, 0.0))
        nw = np.linalg.norm(w)
        if nw == 0.0:
            return 0.0
        v = w / nw
    # a residual that refuses to shrink means the two leading eigenvalues of
    # the Hermitian square are (nearly) tied; the exact solver settles it
    lam = float(np.linalg.eigvalsh(a)[-1])
    return math.sqrt(max(lam, 0.0))


def _sigma_max(mat: np.ndarray) -> float:
    """LAPACK largest singular value; used inside hot subset scans."""
    m = np.atleast_2d(mat)
    if m.size == 0:
        return 0.0
    return float(np.linalg.norm(m, 2))


@dataclass(frozen=True)
class SpaceOperator:
    """Dense operator on l2(X); entry mat[y, x] is the (delta_x -> delta_y) coefficient."""

    space: FiniteMetricSpace
    mat: np.ndarray

    def __post_init__(self):
        m = np.asarray(self.mat, dtype=np.complex128)
        if m.shape != (self.space.n, self.space.n):
            raise ValueError("operator shape does not match the space")
        object.__setattr__(self, "mat", m)

    def to_json(self) -> dict:
        flat = self.mat.reshape(-1)
        return {
            "space_label": self.space.label,
            "n": self.space.n,
            "rows": [[float(z.real), float(z.imag)] for z in flat],
        }

    @staticmethod
    def from_json(obj: dict, space: FiniteMetricSpace) -> "SpaceOperator":
        n = obj["n"]
        if n != space.n:
            raise ValueError("operator json size does not match the space")
        flat = np.array([complex(re, im) for re, im in obj["rows"]])
        return SpaceOperator(space=space, mat=flat.reshape(n, n))


@dataclass(frozen=True)
class RectangleWitness:
    """A compression 1_A u 1_B together with its separation and norm."""

    A: tuple
    B: tuple
    separation: float
    value: float


def opnorm(u: SpaceOperator) -> float:
    return operator_norm(u.mat)


def propagation(u: SpaceOperator, tol: float = ZERO_TOL):
    """Largest distance carrying an entry of modulus > tol; -inf for the zero operator."""
    if tol < 0:
        raise ValueError("tolerance must be nonnegative")
    mask = np.abs(u.mat) > tol
    if not mask.any():
        return -math.inf
    return u.space.dist.T[mask].max()


def rect_norm(u: SpaceOperator, A, B) -> RectangleWitness:
    """Witness for the compression 1_A u 1_B (A on the output side)."""
    A = np.asarray(A, dtype=int)
    B = np.asarray(B, dtype=int)
    if A.size == 0 or B.size == 0:
        raise EmptySubset("rectangle compression needs nonempty subsets")
    value = operator_norm(u.mat[np.ix_(A, B)])
    sep = u.space.set_distance(A, B)
    return RectangleWitness(A=tuple(A.tolist()), B=tuple(B.tolist()), separation=sep, value=value)


def band_mask(space: FiniteMetricSpace, R) -> np.ndarray:
    """Boolean mask of entry positions (y, x) with dist(x, y) <= R."""
    return space.dist <= R


def band_truncate(u: SpaceOperator, R) -> SpaceOperator:
    if R < 0:
        raise ValueError("radius must be nonnegative")
    kept = np.where(band_mask(u.space, R), u.mat, 0.0)
    return SpaceOperator(space=u.space, mat=kept)


def _subset_bits(mask: int, n: int) -> np.ndarray:
    return np.array([i for i in range(n) if mask >> i & 1], dtype=int)


def _candidate_radii(space: FiniteMetricSpace) -> np.ndarray:
    vals = np.unique(space.dist)
    if vals[0] != 0:
        vals = np.concatenate([[0], vals])
    return vals


@dataclass(frozen=True)
class EpsPropagationResult:
    lower: float
    upper: float
    witness: RectangleWitness | None
    mode: str


def _worst_B(space: FiniteMetricSpace, A: np.ndarray, R) -> np.ndarray:
    """Complement of the R-neighborhood of A: the largest admissible B."""
    inside = space.dist[A].min(axis=0) <= R
    return np.flatnonzero(~inside)


def eps_propagation_radius(
    u: SpaceOperator, eps: float, mode: str = "exact", seed: int = 0, budget: int = 1000
) -> EpsPropagationResult:
    """Radius R such that every compression with separation > R has norm <= eps.

    exact: full subset scan over output sets A, with B fixed to the complement
    of the R-neighborhood of A (rectangle norms are monotone in B, so this B
    is the worst case). heuristic: a bracketing pair -- violating rectangles
    give the lower end, band-truncation tails the upper end.
    """
    if eps <= 0:
        raise ValueError("eps must be positive")
    space = u.space
    n = space.n
    radii = _candidate_radii(space)
    if mode == "exact":
        if n > EXACT_EPSPROP_MAX:
            raise TooLargeForExact(f"exact eps-propagation limited to |X| <= {EXACT_EPSPROP_MAX}")
        best_R = 0.0
        witness = None
        for a_mask in range(1, 1 << n):
            A = _subset_bits(a_mask, n)
            lo, hi = 0, len(radii) - 1
            # smallest candidate radius at which this A stops violating
            while lo < hi:
                mid = (lo + hi) // 2
                B = _worst_B(space, A, radii[mid])
                if B.size == 0 or _sigma_max(u.mat[np.ix_(A, B)]) <= eps:
                    hi = mid
                else:
                    lo = mid + 1
            r_a = radii[lo]
            if r_a > best_R:
                best_R = r_a
                if lo > 0:
                    B_prev = _worst_B(space, A, radii[lo - 1])
                    witness = rect_norm(u, A, B_prev)
        return EpsPropagationResult(lower=float(best_R), upper=float(best_R), witness=witness, mode="exact")
    if mode == "heuristic":
        # upper end: smallest radius whose truncation tail is below eps
        lo, hi = 0, len(radii) - 1
        while lo < hi:
            mid = (lo + hi) // 2
            tail = operator_norm(u.mat - band_truncate(u, radii[mid]).mat)
            if tail <= eps:
                hi = mid
            else:
                lo = mid + 1
        upper = float(radii[lo])
        lower = 0.0
        witness = None
        rng = np.random.default_rng(seed)
        for _ in range(budget):
            r = radii[rng.integers(0, len(radii))]
            pair = _closed_pair(u, r, rng)
            if pair is None:
                continue
            A, B = pair
            value = _sigma_max(u.mat[np.ix_(A, B)])
            if value > eps:
                sep = space.set_distance(A, B)
                if sep > lower:
                    lower = float(sep)
                    witness = RectangleWitness(
                        A=tuple(A.tolist()), B=tuple(B.tolist()), separation=sep, value=value
                    )
        return EpsPropagationResult(lower=lower, upper=upper, witness=witness, mode="heuristic")
    raise ValueError(f"unknown mode {mode!r}")


def _closed_pair(u: SpaceOperator, R, rng, pool=None):
    """Grow a random seed set to a maximal separated rectangle at radius R."""
    space = u.space
    n = space.n
    if pool is None:
        pool = np.arange(n)
    size = int(rng.integers(1, max(2, len(pool) // 2 + 1)))
    A = rng.choice(pool, size=min(size, len(pool)), replace=False)
    for _ in range(4):
        B = _worst_B(space, A, R)
        if B.size == 0:
            return None
        A_new = _worst_B(space, B, R)
        if A_new.size == 0:
            return None
        if A_new.size == A.size and np.array_equal(np.sort(A_new), np.sort(A)):
            A = A_new
            break
        A = A_new
    B = _worst_B(space, A, R)
    if B.size == 0:
        return None
    return np.sort(A), np.sort(B)


@dataclass(frozen=True)
class BandDistanceBounds:
    lower: float
    upper: float
    witness: RectangleWitness | None


def dist_to_band_bounds(
    u: SpaceOperator, R, budget: int = 1000, seed: int = 0, pool=None
) -> BandDistanceBounds:
    """Two-sided bounds on the distance from u to the R-band operators.

    Any rectangle with separation > R survives subtraction of an R-band
    operator, so its norm is a lower bound; the truncation tail is an upper
    bound. For |X| <= 12 the lower bound is the exact separated-rectangle
    supremum (full subset scan); otherwise a budgeted random search.
    """
    if R < 0:
        raise ValueError("radius must be nonnegative")
    space = u.space
    n = space.n
    upper = operator_norm(u.mat - band_truncate(u, R).mat)
    best = 0.0
    witness = None

    def consider(A, B):
        nonlocal best, witness
        value = _sigma_max(u.mat[np.ix_(A, B)])
        if value > best:
            best = value
            witness = RectangleWitness(
                A=tuple(np.asarray(A).tolist()),
                B=tuple(np.asarray(B).tolist()),
                separation=space.set_distance(A, B),
                value=value,
            )

    if n <= 12 and pool is None:
        for a_mask in range(1, 1 << n):
            A = _subset_bits(a_mask, n)
            B = _worst_B(space, A, R)
            if B.size:
                consider(A, B)
    else:
        rng = np.random.default_rng(seed)
        for _ in range(budget):
            pair = _closed_pair(u, R, rng, pool=pool)
            if pair is not None:
                consider(*pair)
    return BandDistanceBounds(lower=best, upper=upper, witness=witness)
