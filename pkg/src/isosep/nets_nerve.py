"""Ball covers built on separated nets, with the nerve and the maps to and from it.

``build_cover`` covers a sample by balls of radius eps/2 around a maximal
eps/4-separated net.  ``partition_of_unity`` and ``map_f`` send the sample
into the nerve; ``build_g`` maps the nerve back into the sample by geodesic
edges and coning.
"""
from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from itertools import combinations

import numpy as np
from scipy import sparse
from scipy.sparse import csgraph

from .deformation import BarycentricPoint, radial_project
from .metric_core import DisconnectedGraphError
from .simplicial import SimplicialComplex

NERVE_FORMAT = "isosep-nerve"
NERVE_FORMAT_VERSION = 1


class CoverAuditError(RuntimeError):
    def __init__(self, message: str, witness: int):
        super().__init__(f"{message} (witness point {witness})")
        self.witness = witness


class NerveConsistencyError(RuntimeError):
    pass


class ConingError(RuntimeError):
    def __init__(self, simplex: tuple):
        super().__init__(f"no graph path available to cone simplex {simplex}")
        self.simplex = simplex


@dataclass
class Net:
    centers: list
    sep: float

    def __len__(self):
        return len(self.centers)


def greedy_net(space, sep: float) -> Net:
    """Maximal sep-separated set, scanning points in index order."""
    if sep <= 0:
        raise ValueError("sep must be positive")
    if space.n == 0:
        raise ValueError("empty space")
    covered = np.zeros(space.n, dtype=bool)
    centers = []
    for i in range(space.n):
        if covered[i]:
            continue
        centers.append(i)
        covered[space.ball(i, sep)] = True
    return Net(centers, sep)


def audit_net(space, net: Net) -> tuple[bool, bool]:
    """Brute-force ``(separated, maximal)`` check over all pairs."""
    c = np.asarray(net.centers, dtype=int)
    d = space.pair_dists(c, np.arange(space.n))
    sub = d[:, c]
    np.fill_diagonal(sub, np.inf)
    separated = bool(len(c) < 2 or sub.min() >= net.sep)
    maximal = bool(np.all(d.min(axis=0) <= net.sep))
    return separated, maximal


@dataclass
class BallCover:
    net: Net
    radius: float
    epsilon: float
    lebesgue: float
    multiplicity: int
    delta: float
    members: list = field(repr=False)           # sample indices of each element
    nearest_center: np.ndarray = field(repr=False, default=None)
    max_diameter: float = 0.0
    diameter_method: str = "exact"

    @property
    def size(self) -> int:
        return len(self.members)

    def membership(self, n: int) -> list[tuple]:
        """Sorted tuple of elements containing each sample point."""
        out: list[list[int]] = [[] for _ in range(n)]
        for i, m in enumerate(self.members):
            for p in m:
                out[p].append(i)
        return [tuple(v) for v in out]


def build_cover(space, epsilon: float, audit: bool = True) -> BallCover:
    """Cover by open balls B(x_i, eps/2) around a greedy eps/4-net.

    Every point lies within eps/4 of a center, so its eps/4-ball sits in that
    center's element; with ``audit`` this inclusion is also checked point
    by point on the sample, along with the element diameters.
    """
    if epsilon <= 0:
        raise ValueError("epsilon must be positive")
    net = greedy_net(space, epsilon / 4)
    radius = epsilon / 2
    members = space.balls(net.centers, radius) if hasattr(space, "balls") else \
        [space.ball(c, radius) for c in net.centers]
    counts = np.zeros(space.n, dtype=int)
    for m in members:
        counts[m] += 1
    if counts.min() < 1:
        raise CoverAuditError("sample point outside every cover element", int(np.argmin(counts)))
    cover = BallCover(net, radius, epsilon, epsilon / 4, int(counts.max()), epsilon / 4, members)
    if audit:
        _audit_cover(space, cover)
    return cover


def _audit_cover(space, cover: BallCover) -> None:
    eps = cover.epsilon
    centers = np.asarray(cover.net.centers, dtype=int)
    # nearest center of every point, and the eps/4-ball inclusion check
    dmin = np.full(space.n, np.inf)
    near = np.full(space.n, -1)
    for i, c in enumerate(centers):
        idx, d = space.ball_dists(int(c), eps / 4 * (1 + 1e-12))
        better = d < dmin[idx]
        dmin[idx[better]] = d[better]
        near[idx[better]] = i
    if np.any(near < 0):
        raise CoverAuditError("point farther than eps/4 from every center", int(np.argmax(near < 0)))
    cover.nearest_center = near
    member_mask = {}
    for i in range(cover.size):
        mask = np.zeros(space.n, dtype=bool)
        mask[cover.members[i]] = True
        member_mask[i] = mask
    balls = space.balls(np.arange(space.n), eps / 4) if hasattr(space, "balls") else \
        [space.ball(p, eps / 4) for p in range(space.n)]
    for p, b in enumerate(balls):
        if not member_mask[int(near[p])][b].all():
            raise CoverAuditError("eps/4-ball not contained in a cover element", p)
    # element diameters: exact for closed-form metrics, triangle bound otherwise
    if getattr(space, "metric", "graph") == "graph":
        cover.max_diameter = 2 * max(
            float(space.ball_dists(int(c), cover.radius)[1].max()) for c in centers)
        cover.diameter_method = "triangle"
    else:
        cover.max_diameter = max(space.subset_diameter(m) for m in cover.members)
    if cover.max_diameter > eps:
        raise CoverAuditError("cover element with diameter above epsilon", int(centers[0]))


# ---------------------------------------------------------------------------
# nerve


def nerve_from_members(members, max_dim: int | None = None) -> SimplicialComplex:
    """Simplices are the index sets whose elements share a sample point."""
    point_sets: dict[int, list[int]] = {}
    for i, m in enumerate(members):
        for p in np.asarray(m, dtype=int):
            point_sets.setdefault(int(p), []).append(i)
    maximal = {tuple(sorted(v)) for v in point_sets.values()}
    return SimplicialComplex.from_maximal(maximal, vertex_count=len(members), max_dim=max_dim)


def nerve(cover, max_dim: int | None = None) -> SimplicialComplex:
    members = cover.members if isinstance(cover, BallCover) else cover
    return nerve_from_members(members, max_dim=max_dim)


def brute_force_nerve(members) -> SimplicialComplex:
    """Test every index subset for a common point (exponential, small covers only)."""
    sets = [set(np.asarray(m, dtype=int).tolist()) for m in members]
    found = set()
    for size in range(1, len(sets) + 1):
        any_found = False
        for combo in combinations(range(len(sets)), size):
            if set.intersection(*(sets[i] for i in combo)):
                found.add(combo)
                any_found = True
        if not any_found:
            break
    return SimplicialComplex(len(sets), frozenset(found))


# ---------------------------------------------------------------------------
# partition of unity


@dataclass
class PartitionOfUnity:
    cover: BallCover
    values: sparse.csr_matrix = field(repr=False)   # rows: sample points, cols: elements
    lip_bound: float = 0.0
    lip_rigorous: float = 0.0
    lip_empirical: float = float("nan")

    def row(self, p: int) -> tuple[np.ndarray, np.ndarray]:
        r = self.values.getrow(p)
        order = np.argsort(r.indices)
        return r.indices[order], r.data[order]


def partition_of_unity(space, cover: BallCover, audit_pairs: int = 10_000,
                       seed: int = 0) -> PartitionOfUnity:
    """f_i = phi_i / sum_j phi_j with phi_i = min(1, (2/delta) dist(x, N_{delta/2}(M - U_i))).

    In a length space dist(x, N_{r}(C)) = max(0, dist(x, C) - r), which is
    what is evaluated on the sample.  Only the part of the complement
    within ``radius + delta`` of a center can come closer than delta to
    the element, so each element looks at that annulus alone.
    """
    delta = cover.delta
    if delta > cover.lebesgue * (1 + 1e-12):
        raise ValueError(f"delta {delta:g} exceeds the certified Lebesgue number {cover.lebesgue:g}")
    rows, cols, vals = [], [], []
    for i, (c, m) in enumerate(zip(cover.net.centers, cover.members)):
        region = space.ball(int(c), cover.radius + delta)
        outside = np.setdiff1d(region, m, assume_unique=True)
        if len(outside):
            d = space.nearest_dist(outside, targets=m, within=region) \
                if getattr(space, "metric", "") == "graph" else space.nearest_dist(outside, targets=m)
            d = np.minimum(d, delta)
        else:
            d = np.full(len(m), delta)
        phi = np.minimum(1.0, (2 / delta) * np.maximum(0.0, d - delta / 2))
        keep = phi > 0
        rows.append(np.asarray(m)[keep])
        cols.append(np.full(int(keep.sum()), i))
        vals.append(phi[keep])
    phi = sparse.csr_matrix((np.concatenate(vals), (np.concatenate(rows), np.concatenate(cols))),
                            shape=(space.n, cover.size))
    total = np.asarray(phi.sum(axis=1)).ravel()
    if np.any(total < 1 - 1e-12):
        raise CoverAuditError("phi below 1; Lebesgue certificate violated", int(np.argmin(total)))
    values = sparse.diags(1.0 / total) @ phi
    values = values.tocsr()
    values.sort_indices()
    N = cover.multiplicity
    pou = PartitionOfUnity(cover, values, lip_bound=(2 * N + 1) / delta,
                           lip_rigorous=(4 * N + 2) / delta)
    if audit_pairs:
        pou.lip_empirical = lipschitz_audit(space, pou, audit_pairs, seed)
    return pou


def sample_pairs(space, count: int, seed: int, local_scale: float):
    """Random far pairs plus random nearby pairs, with their distances."""
    rng = np.random.default_rng(seed)
    side = max(1, int(math.sqrt(count)))
    a = rng.choice(space.n, size=min(side, space.n), replace=False)
    b = rng.choice(space.n, size=min(side, space.n), replace=False)
    d = space.pair_dists(a, b)
    I, J = np.meshgrid(a, b, indexing="ij")
    pairs = [(I.ravel(), J.ravel(), d.ravel())]
    # nearby pairs stress the Lipschitz constant
    for p in rng.choice(space.n, size=min(side * 4, space.n), replace=False):
        idx, dd = space.ball_dists(int(p), local_scale)
        pairs.append((np.full(len(idx), p), idx, dd))
    i = np.concatenate([q[0] for q in pairs])
    j = np.concatenate([q[1] for q in pairs])
    d = np.concatenate([q[2] for q in pairs])
    ok = (d > 0) & np.isfinite(d)
    return i[ok], j[ok], d[ok]


def lipschitz_audit(space, pou: PartitionOfUnity, count: int = 10_000, seed: int = 0) -> float:
    """Largest |f_i(x) - f_i(y)| / d(x, y) over sampled pairs and all i."""
    i, j, d = sample_pairs(space, count, seed, pou.cover.delta)
    if len(d) == 0:
        return 0.0
    diff = abs(pou.values[i] - pou.values[j])
    worst = np.asarray(diff.max(axis=1).todense()).ravel()
    return float((worst / d).max())


# ---------------------------------------------------------------------------
# map into the nerve


@dataclass
class NerveMap:
    complex: SimplicialComplex
    images: list = field(repr=False)
    lip_estimate: float = float("nan")
    lip_intrinsic: float = float("nan")


def map_f(pou: PartitionOfUnity, complex_: SimplicialComplex, audit_pairs: int = 10_000,
          space=None, seed: int = 0) -> NerveMap:
    """f(x) = sum_i f_i(x) e_i as barycentric points of the nerve.

    ``complex_`` may be the nerve truncated at some dimension.
    """
    images = []
    members = None
    if complex_.dim < pou.cover.multiplicity - 1:
        members = [np.asarray(m) for m in pou.cover.membership(pou.values.shape[0])]
    for p in range(pou.values.shape[0]):
        idx, w = pou.row(p)
        simplex = tuple(int(v) for v in idx)
        # a truncated nerve cannot hold the larger supports; those are checked
        # against the membership witnessed by p itself
        if len(simplex) - 1 > complex_.dim:
            inside = np.isin(idx, members[p]) if members is not None else np.ones(len(idx), bool)
            if not inside.all():
                raise NerveConsistencyError(f"image support {simplex} of point {p} is not a nerve simplex")
        elif simplex not in complex_.simplices:
            raise NerveConsistencyError(f"image support {simplex} of point {p} is not a nerve simplex")
        images.append(BarycentricPoint(simplex, w / w.sum()))
    nmap = NerveMap(complex_, images)
    if audit_pairs and space is not None:
        i, j, d = sample_pairs(space, audit_pairs, seed, pou.cover.delta)
        hops = _hop_table(complex_)

        def is_simplex(a, b, union):
            if union in complex_.simplices:
                return True
            # the nerve may be truncated; either endpoint can witness the union
            return members is not None and any(set(union) <= set(members[p].tolist()) for p in (a, b))

        eu = np.empty(len(d))
        intr = np.empty(len(d))
        for t, (a, b) in enumerate(zip(i, j)):
            eu[t] = images[a].distance(images[b])
            union = tuple(sorted(set(images[a].simplex) | set(images[b].simplex)))
            intr[t] = eu[t] if is_simplex(a, b, union) else vertex_path_distance(images[a], images[b], hops)
        nmap.lip_estimate = float((eu / d).max()) if len(d) else 0.0
        nmap.lip_intrinsic = float((intr / d).max()) if len(d) else 0.0
    return nmap


def _hop_table(complex_: SimplicialComplex) -> np.ndarray:
    edges = complex_.by_dim.get(1, [])
    n = complex_.vertex_count
    if not edges:
        return np.where(np.eye(n) > 0, 0.0, np.inf)
    e = np.array(edges)
    adj = sparse.coo_matrix((np.ones(len(e)), (e[:, 0], e[:, 1])), shape=(n, n))
    return csgraph.shortest_path(adj, directed=False, unweighted=True)


def vertex_path_distance(a: BarycentricPoint, b: BarycentricPoint, hops) -> float:
    """Length of the shortest path a -> vertex -> edges -> vertex -> b.

    Edges of the nerve have length sqrt 2.  Used as the intrinsic-metric
    surrogate for pairs that share no simplex.
    """
    sa, sb = np.asarray(a.simplex), np.asarray(b.simplex)
    na, nb = float(a.coords @ a.coords), float(b.coords @ b.coords)
    da = np.sqrt(np.maximum(na - 2 * a.coords + 1, 0.0))
    db = np.sqrt(np.maximum(nb - 2 * b.coords + 1, 0.0))
    total = da[:, None] + math.sqrt(2) * hops[np.ix_(sa, sb)] + db[None, :]
    return float(total.min())


def intrinsic_distance(a: BarycentricPoint, b: BarycentricPoint, complex_, hops=None) -> float:
    """Intrinsic-metric surrogate: straight segment inside a common simplex, else a vertex path."""
    union = tuple(sorted(set(a.simplex) | set(b.simplex)))
    if union in complex_.simplices:
        return a.distance(b)
    return vertex_path_distance(a, b, _hop_table(complex_) if hops is None else hops)


# ---------------------------------------------------------------------------
# map back from the nerve


@dataclass
class GluedMap:
    complex: SimplicialComplex
    vertex_images: list
    L: float
    epsilon: float
    cells: dict = field(repr=False, default_factory=dict)       # simplex -> sample indices of g(simplex)
    edge_paths: dict = field(repr=False, default_factory=dict)  # edge -> vertex chain
    diam_table: dict = field(default_factory=dict)
    diam_method: str = "upper-bound"
    flags: list = field(default_factory=list)
    _trees: dict = field(repr=False, default_factory=dict)      # base vertex -> (dist, pred)
    _space: object = field(repr=False, default=None)

    def bound(self, k: int) -> float:
        return math.factorial(k) * (2 * self.L) ** k * self.epsilon

    def _path_to_base(self, p: int, base: int) -> list[int]:
        dist, pred = self._trees[base]
        if not np.isfinite(dist[p]):
            raise ConingError((base,))
        path = [int(p)]
        while path[-1] != self.vertex_images[base]:
            path.append(int(pred[path[-1]]))
        return path

    def evaluate(self, point: BarycentricPoint) -> int:
        """Sample index g(point).

        A vertex goes to its center.  Otherwise the point is written as
        y + t (q - y) with y the barycenter of its support and q on the
        boundary; it goes a fraction t of the way from the base center
        toward g(q) along the coning path.
        """
        point = point.reduced()
        sigma = point.simplex
        if len(sigma) == 1:
            return int(self.vertex_images[sigma[0]])
        if sigma not in self.complex.simplices:
            raise ValueError(f"{sigma} is not a simplex of the nerve")
        y = BarycentricPoint.barycenter(sigma)
        if np.allclose(point.coords, y.coords, atol=1e-15, rtol=0):
            return int(self.vertex_images[sigma[0]])
        q = radial_project(y, point)
        t = _ray_fraction(y, point, q)
        gq = self.evaluate(q)
        path = self._path_to_base(gq, sigma[0])[::-1]      # base ... g(q)
        dist = self._trees[sigma[0]][0]
        target = t * dist[gq]
        for v in path:
            if dist[v] >= target - 1e-15:
                return int(v)
        return int(gq)

    def to_json(self) -> dict:
        return {"vertex_images": [int(v) for v in self.vertex_images], "L": self.L,
                "epsilon": self.epsilon, "diam_method": self.diam_method,
                "diam_table": [{"simplex": list(s), "diam": d, "bound": self.bound(len(s) - 1)}
                               for s, d in sorted(self.diam_table.items(), key=lambda kv: (len(kv[0]), kv[0]))],
                "flags": [list(s) for s in self.flags]}


def _ray_fraction(y: BarycentricPoint, x: BarycentricPoint, q: BarycentricPoint) -> float:
    d = q.coords - y.coords
    return float(np.clip(np.dot(x.coords - y.coords, d) / np.dot(d, d), 0.0, 1.0))


def build_g(complex_: SimplicialComplex, cover: BallCover, space, L: float,
            max_dim: int | None = None) -> GluedMap:
    """Vertices to centers, edges to shortest paths, higher cells by coning.

    Each simplex is coned to the center of its smallest vertex through a
    shortest-path tree rooted there, so the image of a simplex is the union
    of tree paths from its boundary image to the base.  The recorded
    diameters are upper bounds (path length for edges, twice the radius
    about the base above that); those exceeding k! (2L)^k eps are flagged.
    """
    space.check_connected()
    top = complex_.dim if max_dim is None else min(max_dim, complex_.dim)
    centers = [int(c) for c in cover.net.centers]
    g = GluedMap(complex_, centers, float(L), cover.epsilon, _space=space)
    bases = sorted({s[0] for k in range(1, top + 1) for s in complex_.by_dim.get(k, [])})
    if bases:
        dist, pred = csgraph.dijkstra(space.graph, directed=True,
                                      indices=[centers[b] for b in bases], return_predecessors=True)
        for row, b in enumerate(bases):
            g._trees[b] = (dist[row], pred[row])
    for v in range(complex_.vertex_count):
        if (v,) in complex_.simplices:
            g.cells[(v,)] = np.array([centers[v]])
            g.diam_table[(v,)] = 0.0
    for k in range(1, top + 1):
        for sigma in complex_.by_dim.get(k, []):
            base = sigma[0]
            dist, pred = g._trees[base]
            boundary = np.unique(np.concatenate([g.cells[f] for f in combinations(sigma, k)]))
            if not np.all(np.isfinite(dist[boundary])):
                raise ConingError(sigma)
            if k < top:
                g.cells[sigma] = _cone(boundary, pred, centers[base], sigma)
            if k == 1:
                g.edge_paths[sigma] = g._path_to_base(centers[sigma[1]], base)[::-1]
            # a shortest path is no wider than its length; a cone no wider
            # than twice its radius about the base
            # (walking toward the base only lowers the distance to it)
            diam = float(dist[centers[sigma[1]]]) if k == 1 else 2 * float(dist[boundary].max())
            g.diam_table[sigma] = diam
            if diam > g.bound(k) * (1 + 1e-12):
                g.flags.append(sigma)
    return g


def _cone(boundary, pred, root: int, sigma) -> np.ndarray:
    """Union of the tree paths from ``boundary`` to ``root``."""
    cell = set()
    for p in boundary:
        p = int(p)
        while p not in cell:
            cell.add(p)
            if p == root:
                break
            p = int(pred[p])
            if p < 0:
                raise ConingError(sigma)
    return np.array(sorted(cell))


def audit_boundary_agreement(g: GluedMap, samples_per_face: int = 5, seed: int = 0,
                             max_simplices: int = 500) -> int:
    """Count disagreements between g on a simplex and g on its faces.

    Points of each face are evaluated once as points of the face and once
    through the radial decomposition of the larger simplex.  At most
    ``max_simplices`` randomly chosen simplices are examined.
    """
    rng = np.random.default_rng(seed)
    bad = 0
    simplices = sorted((s for s in g.diam_table if len(s) >= 2), key=lambda s: (len(s), s))
    if len(simplices) > max_simplices:
        pick = rng.choice(len(simplices), size=max_simplices, replace=False)
        simplices = [simplices[i] for i in sorted(pick)]
    for sigma in simplices:
        for face in combinations(sigma, len(sigma) - 1):
            for _ in range(samples_per_face):
                w = rng.dirichlet(np.ones(len(face)))
                on_face = BarycentricPoint(face, w)
                full = np.array([w[face.index(v)] if v in face else 0.0 for v in sigma])
                as_sigma = BarycentricPoint(sigma, full / full.sum())
                if g.evaluate(on_face) != g.evaluate(as_sigma):
                    bad += 1
    return bad


# ---------------------------------------------------------------------------
# serialization


def nerve_to_json(complex_: SimplicialComplex, nmap: NerveMap | None = None,
                  g: GluedMap | None = None) -> dict:
    doc = {"format": NERVE_FORMAT, "version": NERVE_FORMAT_VERSION,
           "vertices": list(range(complex_.vertex_count)),
           "simplices": complex_.to_json()["simplices"]}
    if nmap is not None:
        doc["images"] = [p.to_json() for p in nmap.images]
        doc["lip_estimate"] = nmap.lip_estimate
        doc["lip_intrinsic"] = nmap.lip_intrinsic
    if g is not None:
        doc["g"] = g.to_json()
    return doc


def dump_nerve(path, complex_, nmap=None, g=None) -> None:
    with open(path, "w") as fh:
        json.dump(nerve_to_json(complex_, nmap, g), fh, indent=1, sort_keys=True)
