"""Radial projection of sample sets inside simplices, skeleton by skeleton.

Points of a simplicial complex are stored as barycentric coordinates on a
sorted tuple of vertex ids.  Every simplex sits in R^ell as the convex hull
of standard basis vectors, so Euclidean distances between barycentric
coordinate vectors are distances in the complex's simplices.
"""
from __future__ import annotations

import csv
import io
import json
import math
import warnings
from dataclasses import dataclass, field
from functools import lru_cache
from itertools import combinations_with_replacement

import numpy as np
from scipy import sparse

from .measure import MeasureEstimate, hausdorff_estimate

SUM_TOL = 1e-12


class ProjectionError(RuntimeError):
    def __init__(self, message: str, simplex: tuple | None = None):
        super().__init__(message)
        self.simplex = simplex


class BaseCaseObstruction(ProjectionError):
    """A top-dimensional simplex of the target dimension has no point free of E."""


@dataclass(frozen=True, eq=False)
class BarycentricPoint:
    simplex: tuple
    coords: np.ndarray

    def __post_init__(self):
        c = np.asarray(self.coords, dtype=float)
        object.__setattr__(self, "coords", c)
        object.__setattr__(self, "simplex", tuple(int(v) for v in self.simplex))
        if c.shape != (len(self.simplex),):
            raise ValueError("one coordinate per simplex vertex expected")
        if np.any(c < 0):
            raise ValueError(f"negative barycentric coordinate in {c}")
        if abs(c.sum() - 1.0) > SUM_TOL:
            raise ValueError(f"barycentric coordinates sum to {c.sum()!r}, not 1")

    @classmethod
    def vertex(cls, v: int) -> "BarycentricPoint":
        return cls((v,), np.ones(1))

    @classmethod
    def barycenter(cls, simplex) -> "BarycentricPoint":
        m = len(simplex)
        return cls(tuple(simplex), np.full(m, 1.0 / m))

    def support(self) -> tuple:
        return tuple(v for v, c in zip(self.simplex, self.coords) if c > 0)

    def reduced(self) -> "BarycentricPoint":
        """The same point expressed on its support."""
        keep = self.coords > 0
        if keep.all():
            return self
        return BarycentricPoint(tuple(np.asarray(self.simplex)[keep]), self.coords[keep])

    def on_boundary(self) -> bool:
        return bool(np.any(self.coords == 0))

    def as_dict(self) -> dict:
        return {int(v): float(c) for v, c in zip(self.simplex, self.coords)}

    def distance(self, other: "BarycentricPoint") -> float:
        a, b = self.as_dict(), other.as_dict()
        return math.sqrt(sum((a.get(v, 0.0) - b.get(v, 0.0)) ** 2 for v in set(a) | set(b)))

    def to_json(self) -> dict:
        return {"simplex": list(self.simplex), "coords": self.coords.tolist()}


@dataclass
class ComplexSampleSet:
    points: list
    k: int
    scale: float
    weights: np.ndarray | None = None

    def __post_init__(self):
        if self.weights is None:
            self.weights = np.ones(len(self.points))
        self.weights = np.asarray(self.weights, dtype=float)
        if len(self.weights) != len(self.points):
            raise ValueError("one weight per point expected")

    def __len__(self):
        return len(self.points)

    def check_in(self, complex_) -> None:
        for p in self.points:
            if p.reduced().simplex not in complex_.simplices:
                raise ValueError(f"point on {p.simplex} lies outside the complex")

    def replace(self, points) -> "ComplexSampleSet":
        return ComplexSampleSet(list(points), self.k, self.scale, self.weights.copy())


class BarycentricCloud:
    """Barycentric points viewed as a Euclidean point cloud in R^ell.

    Provides the distance queries the covering estimator needs.  Only the
    vertex ids that occur are kept as columns, and the matrix is dense when
    that is small enough.
    """

    metric = "euclidean"
    n_man = 0

    def __init__(self, points):
        rows, cols, vals = [], [], []
        for r, p in enumerate(points):
            rows.extend([r] * len(p.simplex))
            cols.extend(p.simplex)
            vals.extend(p.coords.tolist())
        used, cols = np.unique(np.asarray(cols, dtype=int), return_inverse=True)
        width = max(len(used), 1)
        mat = sparse.csr_matrix((vals, (rows, cols)), shape=(len(points), width))
        self.mat = mat.toarray() if len(points) * width <= 20_000_000 else mat
        self.dense = isinstance(self.mat, np.ndarray)
        sq = (self.mat ** 2).sum(axis=1) if self.dense else self.mat.multiply(self.mat).sum(axis=1)
        self.sq = np.asarray(sq).ravel()
        self.meta = {}

    @property
    def n(self):
        return self.mat.shape[0]

    def __len__(self):
        return self.n

    def _dots(self, a, b):
        out = a @ b.T
        return out if self.dense else np.asarray(out.todense())

    def _dist_row(self, i):
        dots = self._dots(self.mat, self.mat[i:i + 1]).ravel()
        return np.sqrt(np.maximum(self.sq + self.sq[i] - 2 * dots, 0.0))

    def dist_from(self, i, limit=np.inf):
        return self._dist_row(int(i))

    def ball_dists(self, i, r):
        d = self._dist_row(int(i))
        idx = np.flatnonzero(d < r)
        return idx, d[idx]

    def ball(self, i, r):
        return self.ball_dists(i, r)[0]

    def pair_dists(self, rows, cols):
        a, b = self.mat[np.asarray(rows, dtype=int)], self.mat[np.asarray(cols, dtype=int)]
        dots = self._dots(a, b)
        sa, sb = self.sq[np.asarray(rows, dtype=int)], self.sq[np.asarray(cols, dtype=int)]
        return np.sqrt(np.maximum(sa[:, None] + sb[None, :] - 2 * dots, 0.0))

    def resolution(self, idx) -> float:
        """Largest nearest-neighbour gap among the points ``idx``, ignoring duplicates."""
        idx = np.asarray(idx, dtype=int)
        gaps = []
        for start in range(0, len(idx), 512):
            d = self.pair_dists(idx[start:start + 512], idx)
            d[d <= 0] = np.inf
            gaps.append(d.min(axis=1))
        g = np.concatenate(gaps)
        g = g[np.isfinite(g)]
        return float(g.max()) if len(g) else 0.0


# ---------------------------------------------------------------------------
# single simplex


def radial_project(y: BarycentricPoint, x: BarycentricPoint) -> BarycentricPoint:
    """Point where the ray from ``y`` through ``x`` leaves the simplex.

    Both points must be expressed on the same vertex tuple.  Points already
    on the boundary are returned unchanged.
    """
    if y.simplex != x.simplex:
        raise ValueError("radial_project needs both points on the same simplex")
    if np.array_equal(x.coords, y.coords):
        raise ValueError("radial projection is undefined at its center")
    if x.on_boundary():
        return x
    d = x.coords - y.coords
    neg = d < 0
    # first coordinate to reach zero along y + t d
    t_j = np.full(len(d), np.inf)
    t_j[neg] = y.coords[neg] / -d[neg]
    j = int(np.argmin(t_j))
    t = t_j[j]
    z = y.coords + t * d
    hit = t_j <= t
    z[hit] = 0.0
    z = np.maximum(z, 0.0)
    z /= z.sum()
    return BarycentricPoint(x.simplex, z)


def ray_parameter(y: BarycentricPoint, x: BarycentricPoint, z: BarycentricPoint) -> tuple[float, float]:
    """``(t, residual)`` with z ~ y + t (x - y); residual measures non-collinearity."""
    d = x.coords - y.coords
    t = float(np.dot(z.coords - y.coords, d) / np.dot(d, d))
    resid = float(np.max(np.abs(y.coords + (x.coords - y.coords) - (y.coords + (z.coords - y.coords) / t))))
    return t, resid


@lru_cache(maxsize=64)
def half_simplex_grid(m: int, subdivisions: int) -> np.ndarray:
    """Lattice points of the half-size simplex with the same barycenter.

    The full simplex on ``m`` vertices is sampled at the barycentric lattice
    ``a / subdivisions`` (``a`` a nonnegative integer vector summing to
    ``subdivisions``) and shrunk by 1/2 about the barycenter.  Rows follow
    lexicographic order of ``a``.
    """
    pts = []
    for combo in combinations_with_replacement(range(m), subdivisions):
        a = np.bincount(combo, minlength=m)
        pts.append(a[::-1])
    grid = np.array(sorted(map(tuple, pts)), dtype=float) / subdivisions
    grid = 0.5 * grid + 0.5 / m
    grid.flags.writeable = False  # cached, so shared between callers
    return grid


def select_center(points: np.ndarray, k: int, scale: float, weights=None,
                  subdivisions: int = 7, simplex: tuple | None = None) -> np.ndarray:
    """Grid point of the half simplex minimizing sum_w |x - y|^-k over E.

    ``points`` holds the coordinates (rows) of E inside one simplex.  Grid
    points within ``scale`` of E are excluded; the grid is refined once (to
    twice the subdivisions) before giving up.
    """
    points = np.atleast_2d(np.asarray(points, dtype=float))
    m = points.shape[1] if points.size else (len(simplex) if simplex else 0)
    if points.size == 0:
        return np.full(m, 1.0 / m)
    w = np.ones(len(points)) if weights is None else np.asarray(weights, dtype=float)
    for subdiv in (subdivisions, 2 * subdivisions):
        grid = half_simplex_grid(m, subdiv)
        diff = grid[:, None, :] - points[None, :, :]
        dist = np.sqrt(np.einsum("gpk,gpk->gp", diff, diff))
        ok = dist.min(axis=1) > scale
        if not ok.any():
            continue
        with np.errstate(divide="ignore"):
            energy = (w[None, :] * dist ** (-float(k))).sum(axis=1)
        energy[~ok] = np.inf
        return grid[int(np.argmin(energy))]
    raise ProjectionError(
        f"every center candidate of simplex {simplex} lies within {scale:g} of the set", simplex
    )


def complex_measure(points, k: int, scale: float) -> MeasureEstimate:
    """Covering estimate of a barycentric sample, ignoring sub-resolution atoms.

    Clusters (single linkage at ``scale``) whose diameter is below ``scale``
    are points at this resolution and carry no k-measure for k >= 1.
    """
    if len(points) == 0 or k == 0:
        return MeasureEstimate(float(len(points)) if k == 0 else 0.0, k, scale)
    cloud = BarycentricCloud(points)
    n = cloud.n
    # single-linkage clusters
    labels = -np.ones(n, dtype=int)
    diam = []
    for i in range(n):
        if labels[i] >= 0:
            continue
        c = len(diam)
        stack = [i]
        labels[i] = c
        members = []
        while stack:
            p = stack.pop()
            members.append(p)
            for q in cloud.ball(p, scale):
                if labels[q] < 0:
                    labels[q] = c
                    stack.append(q)
        members = np.array(members)
        diam.append(float(cloud.pair_dists(members, members).max()) if len(members) > 1 else 0.0)
    keep = np.flatnonzero(np.array(diam)[labels] >= scale)
    if len(keep) == 0:
        return MeasureEstimate(0.0, k, scale)
    return hausdorff_estimate(cloud, keep, k, scale=scale, check_resolution=False)


def project_simplex(points: list, y0: BarycentricPoint, k: int, scale: float):
    """Radially project the interior points of one simplex away from ``y0``.

    Returns ``(image, growth)``; boundary points are unchanged and growth is
    the ratio of covering measures (1 when the input has measure zero).
    """
    image, growth, _, _ = _project_measured(points, y0, k, scale)
    return image, growth


def _project_measured(points, y0, k, scale):
    image = [p if p.simplex != y0.simplex or p.on_boundary() else radial_project(y0, p)
             for p in points]
    before = complex_measure(points, k, scale).value
    after = complex_measure(image, k, scale).value
    growth = after / before if before > 0 else 1.0
    return image, growth, before, after


# ---------------------------------------------------------------------------
# whole complex


def simplex_volume(k: int) -> float:
    """k-dimensional volume of conv(e_1, ..., e_{k+1}) (side sqrt 2)."""
    return math.sqrt(k + 1) / math.factorial(k)


@dataclass
class ProjectionLog:
    k: int
    dim: int
    stages: list = field(default_factory=list)     # one dict per (stage, simplex)
    stage_growth: dict = field(default_factory=dict)
    measure_initial: float = 0.0
    measure_final: float = 0.0
    support_violations: int = 0
    max_offskeleton: float = 0.0
    notes: list = field(default_factory=list)

    @property
    def cumulative_growth(self) -> float:
        g = 1.0
        for v in self.stage_growth.values():
            g *= v
        return g

    def constants(self) -> list[dict]:
        """Base constant and the empirical version of the recursive chain."""
        rows = [{"n": self.k, "c": simplex_volume(self.k) / 2, "formula": "H_k(simplex_k)/2"}]
        c = rows[0]["c"]
        for n in range(self.k + 1, self.dim + 1):
            C_n = max(1.0, self.stage_growth.get(n, 1.0))
            c = c / C_n
            rows.append({"n": n, "C_n_empirical": C_n, "c": c, "formula": "c_{k,n-1}/C_n"})
        return rows

    def to_json(self) -> dict:
        return {"k": self.k, "dim": self.dim, "stages": self.stages,
                "stage_growth": {str(k): v for k, v in self.stage_growth.items()},
                "cumulative_growth": self.cumulative_growth,
                "measure_initial": self.measure_initial, "measure_final": self.measure_final,
                "support_violations": self.support_violations,
                "max_offskeleton": self.max_offskeleton,
                "constants": self.constants(), "notes": self.notes}

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["stage", "simplex", "center", "measure_before", "measure_after", "growth"])
        for row in self.stages:
            w.writerow([row["stage"], " ".join(map(str, row["simplex"])),
                        " ".join(f"{c:.12g}" for c in row["center"]),
                        f"{row['measure_before']:.12g}", f"{row['measure_after']:.12g}",
                        f"{row['growth']:.12g}"])
        return buf.getvalue()

    def dumps(self) -> str:
        return json.dumps(self.to_json(), indent=2, sort_keys=True)


def project_to_skeleton(complex_, E: ComplexSampleSet, k: int | None = None):
    """Push E into the (k-1)-skeleton, one dimension at a time from the top.

    Every stage only moves points inside their own simplex toward its
    boundary, so supports never grow.  Returns ``(image, log)``.
    """
    k = E.k if k is None else k
    if k < 1:
        raise ValueError("target dimension k must be >= 1")
    E.check_in(complex_)
    points = [p.reduced() for p in E.points]
    dim = complex_.dim
    log = ProjectionLog(k=k, dim=dim)
    log.notes.append("centers are kept at positive distance from the set, so the map "
                     "agrees with the radial projection on every sample point")
    log.measure_initial = complex_measure(points, k, E.scale).value
    base = simplex_volume(k) / 2
    if log.measure_initial > base:
        msg = (f"estimated H_{k}(E) = {log.measure_initial:.4g} exceeds the base constant "
               f"{base:.4g}; projection attempted anyway")
        log.notes.append(msg)
        warnings.warn(msg, stacklevel=2)

    for d in range(dim, k - 1, -1):
        groups: dict[tuple, list[int]] = {}
        for i, p in enumerate(points):
            if len(p.simplex) == d + 1:
                groups.setdefault(p.simplex, []).append(i)
        if not groups:
            continue
        stage_before = complex_measure(points, k, E.scale).value
        for sigma in sorted(groups):
            members = groups[sigma]
            local = np.array([points[i].coords for i in members])
            try:
                y = select_center(local, k, E.scale, E.weights[members], simplex=sigma)
            except ProjectionError as exc:
                if d == k:
                    raise BaseCaseObstruction(
                        f"no point of {k}-simplex {sigma} is free of the set at resolution "
                        f"{E.scale:g}", sigma) from exc
                raise
            y0 = BarycentricPoint(sigma, y)
            old = [points[i] for i in members]
            new, growth, m_before, m_after = _project_measured(old, y0, k, E.scale)
            for i, p_old, p_new in zip(members, old, new):
                p_new = p_new.reduced()
                if not set(p_new.simplex) <= set(p_old.simplex) or len(p_new.simplex) >= len(p_old.simplex):
                    log.support_violations += 1
                points[i] = p_new
            log.stages.append({
                "stage": d, "simplex": list(sigma), "center": y.tolist(),
                "measure_before": m_before,
                "measure_after": m_after,
                "growth": growth,
            })
        stage_after = complex_measure(points, k, E.scale).value
        log.stage_growth[d] = stage_after / stage_before if stage_before > 0 else 1.0

    if log.support_violations:
        raise ProjectionError(f"{log.support_violations} projected points left their simplex")
    log.max_offskeleton = max((offskeleton_mass(p, k - 1) for p in points), default=0.0)
    log.measure_final = complex_measure(points, k, E.scale).value
    return E.replace(points), log


def offskeleton_mass(p: BarycentricPoint, j: int) -> float:
    """Total weight outside the j+1 largest coordinates (0 iff p is in the j-skeleton)."""
    c = np.sort(p.coords)[::-1]
    return float(c[j + 1:].sum())
