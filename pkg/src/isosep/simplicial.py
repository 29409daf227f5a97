"""Finite simplicial complexes and their homology over Z/2."""
from __future__ import annotations

import warnings
from dataclasses import dataclass
from functools import cached_property
from itertools import combinations

import numpy as np


@dataclass(frozen=True)
class SimplicialComplex:
    """Downward-closed set of sorted vertex tuples on vertices ``0..vertex_count-1``."""

    vertex_count: int
    simplices: frozenset

    def __post_init__(self):
        for s in self.simplices:
            if not s or tuple(sorted(set(s))) != s:
                raise ValueError(f"simplex {s!r} is not a sorted tuple of distinct vertices")
            if s[-1] >= self.vertex_count or s[0] < 0:
                raise ValueError(f"simplex {s!r} has a vertex outside 0..{self.vertex_count - 1}")
        for s in self.simplices:
            if len(s) > 1:
                for face in combinations(s, len(s) - 1):
                    if face not in self.simplices:
                        raise ValueError(f"face {face} of {s} is missing (not downward closed)")

    @classmethod
    def from_maximal(cls, maximal, vertex_count: int | None = None,
                     max_dim: int | None = None) -> "SimplicialComplex":
        """Downward closure of ``maximal``, optionally truncated at ``max_dim``."""
        out = set()
        top = None if max_dim is None else max_dim + 1
        for m in {tuple(sorted(set(s))) for s in maximal if len(s)}:
            for size in range(1, len(m) + 1 if top is None else min(len(m), top) + 1):
                out.update(combinations(m, size))
        if vertex_count is None:
            vertex_count = 1 + max((s[-1] for s in out), default=-1)
        return cls(vertex_count, frozenset(out))

    @classmethod
    def full_simplex(cls, n: int) -> "SimplicialComplex":
        """The n-simplex on vertices 0..n."""
        return cls.from_maximal([tuple(range(n + 1))])

    @cached_property
    def dim(self) -> int:
        return max((len(s) for s in self.simplices), default=0) - 1

    @cached_property
    def by_dim(self) -> dict[int, list[tuple]]:
        out: dict[int, list[tuple]] = {}
        for s in sorted(self.simplices):
            out.setdefault(len(s) - 1, []).append(s)
        return out

    def count(self, k: int) -> int:
        return len(self.by_dim.get(k, ()))

    def __contains__(self, s) -> bool:
        return tuple(s) in self.simplices

    def skeleton(self, k: int) -> "SimplicialComplex":
        if k < 0:
            raise ValueError("skeleton dimension must be >= 0")
        if k >= self.dim:
            return self
        return SimplicialComplex(self.vertex_count, frozenset(s for s in self.simplices if len(s) <= k + 1))

    def euler_characteristic(self) -> int:
        return sum((-1) ** k * len(v) for k, v in self.by_dim.items())

    def to_json(self) -> dict:
        return {"vertex_count": self.vertex_count,
                "simplices": [list(s) for s in sorted(self.simplices, key=lambda s: (len(s), s))]}

    @classmethod
    def from_json(cls, doc: dict) -> "SimplicialComplex":
        return cls(int(doc["vertex_count"]), frozenset(tuple(s) for s in doc["simplices"]))


def skeleton(complex_: SimplicialComplex, k: int) -> SimplicialComplex:
    return complex_.skeleton(k)


# ---------------------------------------------------------------------------
# boundary matrices over Z/2
#
# Columns are stored as Python ints used as bitsets over the row simplices,
# which makes column addition a single XOR.


def boundary_columns(complex_: SimplicialComplex, k: int) -> list[int]:
    """Columns of the k-th boundary map C_k -> C_{k-1} as row bitsets."""
    if k <= 0:
        return [0] * complex_.count(k)
    rows = {s: i for i, s in enumerate(complex_.by_dim.get(k - 1, ()))}
    cols = []
    for s in complex_.by_dim.get(k, ()):
        bits = 0
        for face in combinations(s, k):
            bits |= 1 << rows[face]
        cols.append(bits)
    return cols


def boundary_matrix(complex_: SimplicialComplex, k: int) -> np.ndarray:
    """Dense 0/1 matrix of the k-th boundary map (rows: (k-1)-simplices)."""
    n_rows = complex_.count(k - 1) if k > 0 else 0
    cols = boundary_columns(complex_, k)
    mat = np.zeros((n_rows, len(cols)), dtype=np.uint8)
    for j, c in enumerate(cols):
        while c:
            low = c & -c
            mat[low.bit_length() - 1, j] = 1
            c ^= low
    return mat


def rank_z2(columns: list[int]) -> int:
    """Rank over Z/2 of a matrix given by column bitsets.

    Gaussian elimination with the lowest set row index as pivot.
    """
    pivots: dict[int, int] = {}
    rank = 0
    for col in columns:
        while col:
            low = (col & -col).bit_length() - 1
            if low in pivots:
                col ^= pivots[low]
            else:
                pivots[low] = col
                rank += 1
                break
    return rank


@dataclass
class Z2ChainComplex:
    complex: SimplicialComplex

    @cached_property
    def columns(self) -> dict[int, list[int]]:
        return {k: boundary_columns(self.complex, k) for k in range(self.complex.dim + 2)}

    def rank(self, k: int) -> int:
        if k <= 0 or k > self.complex.dim:
            return 0
        return rank_z2(self.columns[k])

    def check_boundary_squared(self) -> bool:
        """True iff every composite of two consecutive boundary maps vanishes."""
        for k in range(2, self.complex.dim + 1):
            lower = self.columns[k - 1]
            for col in self.columns[k]:
                acc = 0
                while col:
                    low = col & -col
                    acc ^= lower[low.bit_length() - 1]
                    col ^= low
                if acc:
                    return False
        return True

    def betti(self, k: int) -> int:
        if k < 0 or k > self.complex.dim:
            return 0
        return self.complex.count(k) - self.rank(k) - self.rank(k + 1)


def betti_z2(complex_: SimplicialComplex, k: int) -> int:
    """Rank of the k-th homology group with Z/2 coefficients."""
    if k < 0 or k > complex_.dim:
        return 0
    # only dimensions k-1..k+1 enter the computation
    return Z2ChainComplex(complex_.skeleton(k + 1)).betti(k)


def betti_numbers(complex_: SimplicialComplex) -> list[int]:
    chain = Z2ChainComplex(complex_)
    return [chain.betti(k) for k in range(complex_.dim + 1)]


# ---------------------------------------------------------------------------
# separation witness


def separation_witness(space, s_set, scale: float) -> int:
    """Betti number in degree ``n_man - 1`` of the nerve of a cover of S at ``scale``.

    ``s_set`` is a :class:`~isosep.measure.SampleSet` (or any index array).
    The cover is the audited ball cover of the subspace S with parameter
    ``scale``; a nonzero result is a homological sign of separation.
    """
    from .nets_nerve import build_cover, nerve
    from .measure import as_indices

    idx = as_indices(s_set)
    if len(idx) == 0:
        warnings.warn("separation_witness called with an empty set; returning 0", stacklevel=2)
        return 0
    if scale <= 0:
        raise ValueError("scale must be positive")
    sub = subspace(space, idx)
    deg = space.n_man - 1
    cover = build_cover(sub, scale, audit=False)
    return betti_z2(nerve(cover, max_dim=deg + 1), deg)


def stable_witness(space, s_set, scales) -> dict:
    """Witness values at successive scales; ``stable`` when the last two agree."""
    values = [separation_witness(space, s_set, s) for s in scales]
    return {"scales": list(scales), "betti": values,
            "stable": len(values) >= 2 and values[-1] == values[-2],
            "witness": values[-1] if len(values) >= 2 and values[-1] == values[-2] else None}


def subspace(space, idx):
    """Restriction of ``space`` to the points ``idx`` (distances inherited)."""
    from .metric_core import FiniteMetricSpace

    idx = np.asarray(idx, dtype=int)
    if space.metric != "graph":
        return FiniteMetricSpace(coords=space.coords[idx], metric=space.metric, n_man=space.n_man,
                                 local_h=space.local_h[idx], radius=space.radius,
                                 meta={"parent_n": space.n})
    return _GraphSubspace(space, idx)


class _GraphSubspace:
    """Subset of a graph-metric space keeping the parent's distances.

    Implements just the distance interface the cover builders use; every
    query is answered by searches in the parent graph.
    """

    metric = "graph"

    def __init__(self, parent, idx):
        self.parent = parent
        self.idx = idx
        self.n_man = parent.n_man
        self.meta = {"parent_n": parent.n}

    @property
    def n(self):
        return len(self.idx)

    def __len__(self):
        return self.n

    @property
    def h(self):
        return float(self.parent.local_h[self.idx].max())

    @property
    def diameter(self):
        return self.parent.subset_diameter(self.idx)

    def dist_from(self, i, limit=np.inf):
        return self.parent.dist_from(int(self.idx[i]), limit=limit)[self.idx]

    def dist(self, i, j):
        return float(self.dist_from(i)[j])

    def pair_dists(self, rows, cols):
        return self.parent.pair_dists(self.idx[np.asarray(rows, dtype=int)], self.idx[np.asarray(cols, dtype=int)])

    def ball(self, i, r):
        return self.ball_dists(i, r)[0]

    def ball_dists(self, i, r):
        d = self.dist_from(i, limit=r)
        idx = np.flatnonzero(d < r)
        return idx, d[idx]

    def balls(self, idx, r):
        return [self.ball(int(i), r) for i in idx]
