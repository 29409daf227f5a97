"""Discretized compact metric spaces.

A :class:`FiniteMetricSpace` is a finite sample of a manifold together with a
distance oracle and a neighborhood graph.  Three metric kinds are supported:

``round``
    great-circle distance on a round sphere of radius ``R`` (any ambient
    dimension, so this covers both the circle and the 2-sphere);
``euclidean``
    straight-line distance between ambient coordinates;
``graph``
    shortest-path distance in the neighborhood graph, with chord lengths as
    edge weights.  Used for surfaces without a closed-form intrinsic metric.
"""
from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from functools import cached_property
from pathlib import Path

import numpy as np
from scipy import sparse
from scipy.sparse import csgraph
from scipy.spatial import cKDTree

METRIC_KINDS = ("round", "euclidean", "graph")
MANIFOLD_KINDS = ("sphere", "torus", "dumbbell_surface", "interval_test", "circle")

SPACE_FORMAT = "isosep-space"
SPACE_FORMAT_VERSION = 1


class DisconnectedGraphError(ValueError):
    def __init__(self, n_components: int, labels: np.ndarray):
        self.n_components = n_components
        self.labels = labels
        sizes = np.bincount(labels)
        reps = [int(np.flatnonzero(labels == c)[0]) for c in range(n_components)]
        super().__init__(
            f"neighborhood graph has {n_components} components "
            f"(sizes {sizes.tolist()}, first points {reps})"
        )


@dataclass(eq=False)
class FiniteMetricSpace:
    """Finite sample of a metric manifold.

    ``local_h`` gives each point its own connectivity radius; two points are
    joined in the neighborhood graph when their chord is at most the smaller
    of their two radii.  ``h`` is the largest of them.
    """

    coords: np.ndarray
    metric: str
    n_man: int
    local_h: np.ndarray
    radius: float = 1.0
    weights: np.ndarray | None = None
    meta: dict = field(default_factory=dict)
    ring: np.ndarray | None = None

    def __post_init__(self):
        self.coords = np.asarray(self.coords, dtype=float)
        if self.coords.ndim == 1:
            self.coords = self.coords[:, None]
        if self.metric not in METRIC_KINDS:
            raise ValueError(f"unknown metric kind {self.metric!r}")
        if self.n_man < 1:
            raise ValueError("n_man must be >= 1")
        self.local_h = np.broadcast_to(
            np.asarray(self.local_h, dtype=float), (len(self.coords),)
        ).copy()

    # -- basic properties -------------------------------------------------

    @property
    def n(self) -> int:
        return len(self.coords)

    def __len__(self) -> int:
        return self.n

    @property
    def h(self) -> float:
        return float(self.local_h.max()) if self.n else 0.0

    @cached_property
    def tree(self) -> cKDTree:
        return cKDTree(self.coords)

    @cached_property
    def graph(self) -> sparse.csr_matrix:
        n = self.n
        if n < 2:
            return sparse.csr_matrix((n, n))
        pairs = self.tree.query_pairs(self.h, output_type="ndarray")
        if len(pairs):
            i, j = pairs[:, 0], pairs[:, 1]
            chord = np.linalg.norm(self.coords[i] - self.coords[j], axis=1)
            keep = chord <= np.minimum(self.local_h[i], self.local_h[j])
            i, j, chord = i[keep], j[keep], chord[keep]
            w = self._chord_to_dist(chord) if self.metric == "round" else chord
        else:
            i = j = np.zeros(0, dtype=int)
            w = np.zeros(0)
        # zero-length edges would vanish from a sparse matrix
        w = np.maximum(w, np.finfo(float).tiny)
        g = sparse.coo_matrix((w, (i, j)), shape=(n, n)).tocsr()
        # stored symmetric, so searches run with directed=True and skip scipy's
        # undirected conversion on every call
        return (g + g.T).tocsr()

    def check_connected(self) -> None:
        n_comp, labels = csgraph.connected_components(self.graph, directed=False)
        if n_comp > 1:
            raise DisconnectedGraphError(n_comp, labels)

    @cached_property
    def diameter(self) -> float:
        if "diam" in self.meta:
            return float(self.meta["diam"])
        if self.n < 2:
            return 0.0
        # double sweep; exact for the round and euclidean kinds up to sampling
        d0 = self.dist_from(0)
        a = int(np.argmax(d0))
        return float(np.max(self.dist_from(a)))

    # -- distances ----------------------------------------------------------

    def _chord_to_dist(self, chord):
        chord = np.asarray(chord, dtype=float)
        r = self.radius
        return 2.0 * r * np.arcsin(np.clip(chord / (2.0 * r), 0.0, 1.0))

    def _dist_to_chord(self, d: float) -> float:
        r = self.radius
        return 2.0 * r * math.sin(min(d, math.pi * r) / (2.0 * r))

    def _exact(self, a: np.ndarray, b: np.ndarray) -> np.ndarray:
        diff = a[..., :, None, :] - b[..., None, :, :]
        chord = np.sqrt(np.einsum("...k,...k->...", diff, diff))
        if self.metric == "round":
            return self._chord_to_dist(chord)
        return chord

    def dist(self, i: int, j: int) -> float:
        if i == j:
            return 0.0
        if self.metric == "graph":
            return float(self.dist_from(i, limit=np.inf)[j])
        return float(self._exact(self.coords[[i]], self.coords[[j]])[0, 0])

    def dist_from(self, i: int, limit: float = np.inf) -> np.ndarray:
        """Distances from point ``i`` to every point (``inf`` past ``limit`` for graphs)."""
        if self.metric == "graph":
            return csgraph.dijkstra(self.graph, directed=True, indices=int(i), limit=limit)
        return self._exact(self.coords[[i]], self.coords)[0]

    def pair_dists(self, rows, cols) -> np.ndarray:
        rows = np.asarray(rows, dtype=int)
        cols = np.asarray(cols, dtype=int)
        if self.metric == "graph":
            if len(rows) == 0:
                return np.zeros((0, len(cols)))
            d = csgraph.dijkstra(self.graph, directed=True, indices=rows)
            return d[:, cols]
        return self._exact(self.coords[rows], self.coords[cols])

    def ball(self, i: int, r: float) -> np.ndarray:
        """Sorted indices of sample points at distance < r from point ``i``."""
        return self.ball_dists(i, r)[0]

    def ball_dists(self, i: int, r: float) -> tuple[np.ndarray, np.ndarray]:
        """Indices at distance < r from ``i`` together with those distances."""
        if r <= 0:
            return np.zeros(0, dtype=int), np.zeros(0)
        if self.metric == "graph":
            d = self.dist_from(i, limit=r)
            idx = np.flatnonzero(d < r)
            return idx, d[idx]
        chord = self._dist_to_chord(r) if self.metric == "round" else r
        cand = np.array(sorted(self.tree.query_ball_point(self.coords[i], chord * (1 + 1e-9) + 1e-12)), dtype=int)
        if len(cand) == 0:
            return cand, np.zeros(0)
        d = self._exact(self.coords[[i]], self.coords[cand])[0]
        keep = d < r
        return cand[keep], d[keep]

    def balls(self, idx, r: float) -> list[np.ndarray]:
        idx = np.asarray(idx, dtype=int)
        if self.metric != "graph":
            return [self.ball(int(i), r) for i in idx]
        out = []
        for start in range(0, len(idx), 256):
            chunk = idx[start:start + 256]
            d = csgraph.dijkstra(self.graph, directed=True, indices=chunk, limit=r)
            out.extend(np.flatnonzero(row < r) for row in d)
        return out

    def nearest_dist(self, sources, targets=None, within=None) -> np.ndarray:
        """Distance from each target point to the nearest source point.

        ``within`` restricts graph searches to an induced subgraph; callers
        pass a region large enough to contain every relevant shortest path.
        Returns ``inf`` where no source is reachable.
        """
        sources = np.asarray(sources, dtype=int)
        targets = np.arange(self.n) if targets is None else np.asarray(targets, dtype=int)
        if len(sources) == 0:
            return np.full(len(targets), np.inf)
        if self.metric == "graph":
            if within is None:
                d = csgraph.dijkstra(self.graph, directed=True, indices=sources, min_only=True)
                return d[targets]
            within = np.asarray(within, dtype=int)
            pos = np.full(self.n, -1)
            pos[within] = np.arange(len(within))
            sub = self.graph[within][:, within]
            d = csgraph.dijkstra(sub, directed=True, indices=pos[sources], min_only=True)
            return d[pos[targets]]
        tree = cKDTree(self.coords[sources])
        chord, _ = tree.query(self.coords[targets])
        return self._chord_to_dist(chord) if self.metric == "round" else np.asarray(chord, dtype=float)

    def graph_geodesic(self, i: int, j: int) -> float:
        if i == j:
            return 0.0
        self.check_connected()
        return float(csgraph.dijkstra(self.graph, directed=True, indices=int(i))[j])

    def shortest_path(self, i: int, j: int) -> list[int]:
        """Vertex sequence of a shortest graph path from ``i`` to ``j``."""
        if i == j:
            return [int(i)]
        _, pred = csgraph.dijkstra(
            self.graph, directed=True, indices=int(i), return_predecessors=True
        )
        if pred[j] < 0:
            raise DisconnectedGraphError(*csgraph.connected_components(self.graph, directed=False))
        path = [int(j)]
        while path[-1] != i:
            path.append(int(pred[path[-1]]))
        return path[::-1]

    def subset_diameter(self, idx) -> float:
        idx = np.unique(np.asarray(idx, dtype=int))
        if len(idx) < 2:
            return 0.0
        return float(self.pair_dists(idx, idx).max())

    def scaled(self, lam: float) -> "FiniteMetricSpace":
        """The same sample with every distance multiplied by ``lam``."""
        if lam <= 0:
            raise ValueError("scale factor must be positive")
        meta = dict(self.meta)
        for key in ("diam", "area", "length", "spacing"):
            if key in meta:
                meta[key] = meta[key] * lam ** (2 if key == "area" else 1)
        meta["rescaled_by"] = meta.get("rescaled_by", 1.0) * lam
        return FiniteMetricSpace(
            coords=self.coords * lam,
            metric=self.metric,
            n_man=self.n_man,
            local_h=self.local_h * lam,
            radius=self.radius * lam,
            weights=None if self.weights is None else self.weights * lam ** self.n_man,
            meta=meta,
            ring=self.ring,
        )

    def audit_triangle(self, trials: int = 1000, seed: int = 0) -> float:
        """Largest triangle-inequality violation over random triples (0 if none)."""
        if self.n < 3:
            return 0.0
        rng = np.random.default_rng(seed)
        a = rng.integers(0, self.n, size=min(trials, 64))
        worst = 0.0
        per = max(1, trials // len(a))
        for i in a:
            di = self.dist_from(int(i))
            jk = rng.integers(0, self.n, size=(per, 2))
            djk = np.array([self.dist(int(j), int(k)) for j, k in jk]) if self.metric == "graph" else \
                self._exact(self.coords[jk[:, 0]][:, None, :], self.coords[jk[:, 1]][:, None, :])[:, 0, 0]
            viol = di[jk[:, 1]] - (di[jk[:, 0]] + djk)
            worst = max(worst, float(viol.max()))
        return max(worst, 0.0)


# ---------------------------------------------------------------------------
# generators


@dataclass(frozen=True)
class ManifoldSpec:
    kind: str
    params: dict = field(default_factory=dict)
    sample_count: int = 1000
    seed: int = 0

    def validate(self) -> None:
        if self.kind not in MANIFOLD_KINDS:
            raise ValueError(f"unknown manifold kind {self.kind!r}; expected one of {MANIFOLD_KINDS}")
        if self.sample_count < 1:
            raise ValueError("sample_count must be >= 1")
        allowed = _DEFAULT_PARAMS[self.kind]
        extra = set(self.params) - set(allowed)
        if extra:
            raise ValueError(f"unknown parameters for {self.kind}: {sorted(extra)}")
        p = self.resolved_params()
        for key, val in p.items():
            if not (isinstance(val, (int, float)) and val > 0):
                raise ValueError(f"parameter {key} must be positive, got {val!r}")
        if self.kind == "dumbbell_surface" and not p["eps"] < 1:
            raise ValueError(f"dumbbell neck radius eps must satisfy 0 < eps < 1, got {p['eps']}")
        if self.kind == "torus" and not p["r"] < p["R"]:
            raise ValueError("torus requires minor radius r < major radius R")

    def resolved_params(self) -> dict:
        p = dict(_DEFAULT_PARAMS[self.kind])
        p.update(self.params)
        return p


_DEFAULT_PARAMS = {
    "sphere": {"R": 1.0, "graph_factor": 2.5},
    "circle": {"R": 1.0, "graph_factor": 2.5},
    "interval_test": {"length": 1.0, "graph_factor": 2.5},
    "torus": {"R": 1.0, "r": 0.4, "graph_factor": 2.5},
    "dumbbell_surface": {"eps": 0.1, "graph_factor": 2.5, "neck_ring": 24},
}


def generate(spec: ManifoldSpec) -> FiniteMetricSpace:
    spec.validate()
    p = spec.resolved_params()
    rng = np.random.default_rng(spec.seed)
    builder = {
        "sphere": _gen_sphere,
        "circle": _gen_circle,
        "interval_test": _gen_interval,
        "torus": _gen_torus,
        "dumbbell_surface": _gen_dumbbell,
    }[spec.kind]
    space = builder(p, spec.sample_count, rng)
    space.meta.update(kind=spec.kind, params=p, sample_count=spec.sample_count, seed=spec.seed)
    return space


def _gen_interval(p, n, rng):
    length = p["length"]
    if n == 1:
        x = np.array([0.5 * length])
        spacing = length
    else:
        x = np.linspace(0.0, length, n)
        spacing = length / (n - 1)
    return FiniteMetricSpace(
        coords=x[:, None], metric="euclidean", n_man=1,
        local_h=p["graph_factor"] * spacing,
        weights=np.full(n, length / n),
        meta={"length": length, "diam": length if n > 1 else 0.0, "spacing": spacing, "L_model": 1.0},
    )


def _gen_circle(p, n, rng):
    R = p["R"]
    phase = rng.uniform(0, 2 * np.pi / n)
    t = phase + 2 * np.pi * np.arange(n) / n
    coords = R * np.column_stack([np.cos(t), np.sin(t)])
    spacing = 2 * np.pi * R / n
    return FiniteMetricSpace(
        coords=coords, metric="round", n_man=1, radius=R,
        local_h=p["graph_factor"] * spacing,
        weights=np.full(n, spacing),
        meta={"length": 2 * np.pi * R, "diam": np.pi * R if n > 1 else 0.0,
              "spacing": spacing, "L_model": 1.0},
    )


def _rings(profile_x, profile_y, spacing, rng):
    """Points on circles of revolution about the first axis.

    ``spacing`` is the target point spacing at each ring position; ring ``j``
    carries ``round(2*pi*y_j / spacing_j)`` points (at least one) with a random
    angular phase.
    """
    pts, hs, wts, ring_id = [], [], [], []
    for j, (x, y, d) in enumerate(zip(profile_x, profile_y, spacing)):
        m = max(1, int(round(2 * np.pi * y / d)))
        if y < 1e-9:
            m = 1
        phi = rng.uniform(0, 2 * np.pi / m) + 2 * np.pi * np.arange(m) / m
        pts.append(np.column_stack([np.full(m, x), y * np.cos(phi), y * np.sin(phi)]))
        hs.append(np.full(m, d))
        wts.append(np.full(m, 2 * np.pi * y * d / m if m > 1 else np.pi * (d / 2) ** 2))
        ring_id.append(np.full(m, j))
    return (np.vstack(pts), np.concatenate(hs), np.concatenate(wts), np.concatenate(ring_id))


def _gen_sphere(p, n, rng):
    R = p["R"]
    if n == 1:
        return FiniteMetricSpace(
            coords=np.array([[R, 0.0, 0.0]]), metric="round", n_man=2, radius=R,
            local_h=p["graph_factor"] * R, weights=np.array([4 * np.pi * R**2]),
            meta={"area": 4 * np.pi * R**2, "diam": 0.0, "spacing": np.pi * R, "L_model": 1.0},
        )
    spacing = math.sqrt(4 * np.pi / n) * R
    m = max(1, int(round(np.pi * R / spacing)))
    colat = np.pi * np.arange(m + 1) / m
    gap = np.pi * R / m
    # along-ring spacing matched to the ring gap keeps the density uniform
    coords, _, w, ring = _rings(R * np.cos(colat), R * np.sin(colat), np.full(m + 1, gap), rng)
    space = FiniteMetricSpace(
        coords=coords, metric="round", n_man=2, radius=R,
        local_h=p["graph_factor"] * gap, weights=w * (4 * np.pi * R**2) / w.sum(),
        meta={"area": 4 * np.pi * R**2, "diam": np.pi * R, "spacing": gap,
              "L_model": 1.0, "ring_colatitudes": colat.tolist()},
    )
    space.ring = ring
    return space


def _gen_torus(p, n, rng):
    R, r = p["R"], p["r"]
    area = 4 * np.pi**2 * R * r
    spacing = math.sqrt(area / n)
    m = max(3, int(round(2 * np.pi * r / spacing)))
    u = 2 * np.pi * np.arange(m) / m
    d = np.full(m, 2 * np.pi * r / m)
    coords, local, w, ring = _rings(r * np.sin(u), R + r * np.cos(u), d, rng)
    space = FiniteMetricSpace(
        coords=coords, metric="graph", n_man=2, local_h=p["graph_factor"] * local,
        weights=w * area / w.sum(),
        meta={"area": area, "spacing": float(d[0]), "L_model": 1.0},
    )
    space.ring = ring
    return space


def dumbbell_profile(eps: float, samples: int = 20000):
    """Meridian of the dumbbell surface, from the left outer pole to the right one.

    Two unit spheres joined by a cylinder of radius ``eps`` spanning
    ``x in [-1/2, 1/2]``; each junction is rounded by a fillet of radius
    ``eps/2`` tangent to both pieces.  Returns ``(x, y, s)`` with ``s`` the
    arclength parameter.
    """
    rf = eps / 2
    c = 0.5 + math.sqrt(1 - eps**2)        # right sphere center on the axis
    fx = c - math.sqrt((1 + rf) ** 2 - (eps + rf) ** 2)  # right fillet center x
    fy = eps + rf
    # tangent point between fillet and right sphere
    tx = c + (fx - c) / (1 + rf)
    ty = fy / (1 + rf)
    alpha_t = math.atan2(ty, tx - c)       # polar angle of tangent point, about the sphere center
    beta_t = math.atan2(ty - fy, tx - fx)  # angle of tangent point around the fillet center

    # right half: cylinder (x from 0 to fx), fillet, sphere arc to the outer pole
    n = samples // 2
    cyl_len = fx
    fil_len = rf * (beta_t + math.pi / 2)
    sph_len = alpha_t
    total = cyl_len + fil_len + sph_len
    s = np.linspace(0.0, total, n)
    x = np.empty(n)
    y = np.empty(n)
    a = s <= cyl_len
    x[a], y[a] = s[a], eps
    b = (s > cyl_len) & (s <= cyl_len + fil_len)
    ang = -math.pi / 2 + (s[b] - cyl_len) / rf
    x[b], y[b] = fx + rf * np.cos(ang), fy + rf * np.sin(ang)
    cc = s > cyl_len + fil_len
    theta = alpha_t - (s[cc] - cyl_len - fil_len)
    x[cc], y[cc] = c + np.cos(theta), np.sin(theta)
    y = np.maximum(y, 0.0)
    xs = np.concatenate([-x[::-1], x[1:]])
    ys = np.concatenate([y[::-1], y[1:]])
    seg = np.hypot(np.diff(xs), np.diff(ys))
    ss = np.concatenate([[0.0], np.cumsum(seg)])
    return xs, ys, ss


def dumbbell_area(eps: float) -> float:
    x, y, s = dumbbell_profile(eps, 200001)
    return float(np.trapezoid(2 * np.pi * y, s))


def _gen_dumbbell(p, n, rng):
    eps = p["eps"]
    xs, ys, ss = dumbbell_profile(eps)
    area = dumbbell_area(eps)
    d0 = math.sqrt(area / n)
    ring_pts = max(12, int(round(p["neck_ring"] * math.sqrt(n / 4000))))
    d_min = 2 * np.pi * eps / ring_pts
    # target spacing: fine along the neck, coarse on the outer halves of the bells
    c = 0.5 + math.sqrt(1 - eps**2)
    inner = np.abs(xs) < c
    target = np.where(inner, np.clip(2 * np.pi * ys / ring_pts, d_min, d0), d0)
    density = np.concatenate([[0.0], np.cumsum(np.diff(ss) / target[1:])])
    m = max(2, int(round(density[-1])))
    s_rings = np.interp(np.linspace(0, density[-1], m + 1), density, ss)
    rx = np.interp(s_rings, ss, xs)
    ry = np.interp(s_rings, ss, ys)
    rd = np.interp(s_rings, ss, target)
    ry[0] = ry[-1] = 0.0
    coords, local, w, ring = _rings(rx, ry, rd, rng)
    space = FiniteMetricSpace(
        coords=coords, metric="graph", n_man=2, local_h=p["graph_factor"] * local,
        weights=w * area / w.sum(),
        meta={"area": area, "spacing": d0, "neck_spacing": d_min, "L_model": 1.0 / eps,
              "neck_circumference": 2 * np.pi * eps, "ring_x": rx.tolist()},
    )
    space.ring = ring
    return space


# ---------------------------------------------------------------------------
# doubling


def estimate_doubling(space: FiniteMetricSpace, trials: int, seed: int = 0,
                      radii=None) -> int:
    """Largest r/2-separated subset found in sampled balls B(center, r).

    Every returned count is realized by an explicit separated set, so the
    result is a certified lower bound for the doubling constant.  Radii are
    drawn log-uniformly between the graph scale and the diameter unless
    ``radii`` is given.  Draws are made trial by trial from one generator,
    so more trials never lower the result.
    """
    if space.n == 0:
        raise ValueError("empty space")
    if trials < 1:
        raise ValueError("trials must be >= 1")
    if space.n == 1:
        return 1
    rng = np.random.default_rng(seed)
    diam = space.diameter
    lo = min(space.h, diam) if space.h > 0 else diam / 100
    best = 1
    for t in range(trials):
        c = int(rng.integers(space.n))
        u = rng.uniform()
        if radii is not None:
            r = float(radii[t % len(radii)])
        else:
            r = lo * (diam / lo) ** u
        best = max(best, len(separated_in_ball(space, c, r)))
    return best


def separated_in_ball(space: FiniteMetricSpace, center: int, r: float,
                      random_orders: int = 2, seed: int = 0) -> list[int]:
    """Largest r/2-separated subset of B(center, r) found by several greedy scans.

    Scans: farthest-point insertion from the center, outermost points
    first, a sweep away from an extreme point, and a few random orders.
    """
    members = space.ball(center, r)
    if len(members) == 0:
        return []
    rows: dict[int, np.ndarray] = {}

    def row(p):
        if p not in rows:
            rows[p] = space.dist_from(int(p), limit=2 * r)[members]
        return rows[p]

    def scan(order):
        chosen = []
        mind = np.full(len(members), np.inf)
        for k in order:
            if mind[k] >= r / 2:
                chosen.append(int(members[k]))
                mind = np.minimum(mind, row(members[k]))
        return chosen

    d0 = row(center)
    best = []
    # farthest-point insertion seeded at the center
    chosen = [int(center)]
    mind = d0.copy()
    while True:
        k = int(np.argmax(mind))
        if mind[k] < r / 2:
            break
        chosen.append(int(members[k]))
        mind = np.minimum(mind, row(members[k]))
    best = chosen
    orders = [np.argsort(-d0, kind="stable")]
    far = int(members[int(np.argmax(d0))])
    orders.append(np.argsort(row(far), kind="stable"))
    rng = np.random.default_rng(seed + int(center))
    orders.extend(rng.permutation(len(members)) for _ in range(random_orders))
    for order in orders:
        c = scan(order)
        if len(c) > len(best):
            best = c
    return best


# ---------------------------------------------------------------------------
# serialization


def save_space(space: FiniteMetricSpace, path) -> None:
    """Write the sample as a text table preceded by a JSON metadata line.

    Layout::

        #isosep-space 1
        #meta {"metric": ..., "n_man": ..., "radius": ..., "meta": {...}}
        x_1 ... x_d local_h weight
        ...
    """
    header = {
        "metric": space.metric,
        "n_man": space.n_man,
        "radius": space.radius,
        "dim": space.coords.shape[1],
        "meta": _jsonable(space.meta),
    }
    w = space.weights if space.weights is not None else np.full(space.n, np.nan)
    table = np.column_stack([space.coords, space.local_h, w])
    path = Path(path)
    with path.open("w") as fh:
        fh.write(f"#{SPACE_FORMAT} {SPACE_FORMAT_VERSION}\n")
        fh.write("#meta " + json.dumps(header, sort_keys=True) + "\n")
        for row in table:
            fh.write(" ".join(repr(float(v)) for v in row) + "\n")


def load_space(path) -> FiniteMetricSpace:
    path = Path(path)
    with path.open() as fh:
        first = fh.readline().split()
        if len(first) != 2 or first[0] != "#" + SPACE_FORMAT:
            raise ValueError(f"{path}: not an {SPACE_FORMAT} file")
        if int(first[1]) != SPACE_FORMAT_VERSION:
            raise ValueError(f"{path}: unsupported version {first[1]}")
        meta_line = fh.readline()
        if not meta_line.startswith("#meta "):
            raise ValueError(f"{path}: missing metadata line")
        header = json.loads(meta_line[len("#meta "):])
        table = np.loadtxt(fh, ndmin=2)
    d = header["dim"]
    w = table[:, d + 1]
    return FiniteMetricSpace(
        coords=table[:, :d], metric=header["metric"], n_man=header["n_man"],
        local_h=table[:, d], radius=header["radius"],
        weights=None if np.all(np.isnan(w)) else w, meta=header["meta"],
    )


def _jsonable(obj):
    if isinstance(obj, dict):
        return {str(k): _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return obj.tolist()
    if isinstance(obj, np.generic):
        return obj.item()
    return obj
