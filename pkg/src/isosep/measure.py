"""Covering surrogates for Hausdorff measure, and the separation radius of a set."""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy.sparse import csgraph

ROLES = ("separating_set", "region", "level_set")

# Jamming coverage fractions of random sequential adsorption of k-balls.
# Greedy nets built in random order on a dense uniform sample are RSA
# configurations, so count * ball volume / coverage is an unbiased measure.
RSA_COVERAGE = {1: 0.7475979202534, 2: 0.547069, 3: 0.38413}
COVER_ORDERS = 4
COVER_SEED = 20240917


@dataclass
class SampleSet:
    indices: np.ndarray
    scale: float
    role: str = "separating_set"
    label: str = ""

    def __post_init__(self):
        self.indices = np.unique(np.asarray(self.indices, dtype=int))
        if not self.scale > 0:
            raise ValueError("SampleSet scale must be positive")
        if self.role not in ROLES:
            raise ValueError(f"unknown role {self.role!r}")

    def __len__(self):
        return len(self.indices)

    def to_json(self) -> dict:
        return {"indices": self.indices.tolist(), "scale": self.scale,
                "role": self.role, "label": self.label}

    @classmethod
    def from_json(cls, doc: dict) -> "SampleSet":
        return cls(np.asarray(doc["indices"], dtype=int), float(doc["scale"]),
                   doc.get("role", "separating_set"), doc.get("label", ""))


def as_indices(s) -> np.ndarray:
    if isinstance(s, SampleSet):
        return s.indices
    return np.unique(np.asarray(s, dtype=int))


@dataclass
class MeasureEstimate:
    value: float
    k: int
    scale: float
    method: str = "covering"
    spread: float = 0.0
    per_scale: list = field(default_factory=list)

    def to_json(self) -> dict:
        return {"value": self.value, "k": self.k, "scale": self.scale,
                "method": self.method, "spread": self.spread, "per_scale": self.per_scale}


@dataclass
class SeparationStats:
    labels: np.ndarray                 # component id per sample point, -1 if removed
    n_components: int
    removed: np.ndarray                # indices within the thickening of S
    inrads: list = field(default_factory=list)
    deepest: list = field(default_factory=list)
    seprad: float = 0.0
    separated_pairs: list = field(default_factory=list)

    def component(self, c: int) -> np.ndarray:
        return np.flatnonzero(self.labels == c)

    def to_json(self) -> dict:
        return {"n_components": self.n_components, "removed": int(len(self.removed)),
                "component_sizes": [int(np.sum(self.labels == c)) for c in range(self.n_components)],
                "inrads": self.inrads, "seprad": self.seprad,
                "separated_pairs": self.separated_pairs}


# ---------------------------------------------------------------------------
# covering estimator


def ball_volume(k: int) -> float:
    return math.pi ** (k / 2) / math.gamma(k / 2 + 1)


def covering_normalization(k: int) -> float:
    """Factor turning ``count * (2s)^k`` into a k-dimensional measure."""
    if k == 0:
        return 1.0
    if k not in RSA_COVERAGE:
        raise ValueError(f"no covering normalization for k={k}")
    return ball_volume(k) / (4 ** k * RSA_COVERAGE[k])


TIE_TOL = 1e-9


def covering_net(space, idx, s: float, seed: int = COVER_SEED,
                 slack: float = 0.0) -> tuple[int, float]:
    """Greedy s-net of the points ``idx`` visited in a seeded random order.

    Returns the number of centers and their realized minimum separation,
    looked for up to ``s + slack`` (``s`` itself when no pair is that close).
    """
    idx = np.asarray(idx, dtype=int)
    if len(idx) == 0:
        return 0, s
    covered = np.zeros(space.n, dtype=bool)
    is_center = np.zeros(space.n, dtype=bool)
    order = np.random.default_rng(seed).permutation(idx)
    count = 0
    min_sep = s + slack
    for p in order:
        if covered[p]:
            continue
        count += 1
        near, d = space.ball_dists(int(p), s + slack)
        hit = is_center[near]
        if hit.any():
            min_sep = min(min_sep, float(d[hit].min()))
        # ties at exactly s (lattice samples) resolve the same way at every scale
        covered[near[d < s * (1 - TIE_TOL)]] = True
        is_center[p] = True
    return count, max(min_sep, s)


def covering_count(space, idx, s: float, seed: int = COVER_SEED) -> int:
    return covering_net(space, idx, s, seed)[0]


def set_resolution(space, idx) -> float:
    """Largest nearest-neighbour gap inside the set (0 for fewer than two points)."""
    idx = np.asarray(idx, dtype=int)
    if len(idx) < 2:
        return 0.0
    if hasattr(space, "resolution"):
        return float(space.resolution(idx))
    if space.metric == "graph":
        factor = space.meta.get("params", {}).get("graph_factor", 2.5)
        return float(space.local_h[idx].max() / factor)
    from scipy.spatial import cKDTree

    chord, _ = cKDTree(space.coords[idx]).query(space.coords[idx], k=2)
    gap = chord[:, 1]
    if space.metric == "round":
        gap = space._chord_to_dist(gap)
    return float(gap.max())


def hausdorff_estimate(space, s_set, k: int, scale: float | None = None,
                       orders: int = COVER_ORDERS, check_resolution: bool = True) -> MeasureEstimate:
    """Covering-number surrogate for the k-dimensional Hausdorff measure of a sample set.

    The set is covered greedily by balls of radius s at the three scales
    ``scale / sqrt(2), scale, scale * sqrt(2)``; each count is averaged over
    ``orders`` fixed random visiting orders and converted with
    :func:`covering_normalization`.  The middle value is reported and half
    the range is the spread.
    """
    if k < 0:
        raise ValueError("k must be >= 0")
    idx = as_indices(s_set)
    if scale is None:
        if not isinstance(s_set, SampleSet):
            raise ValueError("scale required for a bare index set")
        scale = s_set.scale
    if len(idx) == 0:
        return MeasureEstimate(0.0, k, scale, spread=0.0)
    if k == 0:
        return MeasureEstimate(float(len(idx)), 0, scale, spread=0.0)
    scales = [scale / math.sqrt(2), scale, scale * math.sqrt(2)]
    if check_resolution:
        res = set_resolution(space, idx)
        if scales[0] < 2 * res:
            raise ValueError(
                f"covering scale {scales[0]:.4g} is below twice the sampling resolution {res:.4g}"
            )
    norm = covering_normalization(k)
    res = set_resolution(space, idx)
    values = []
    for s in scales:
        # on a discrete sample the realized separation overshoots s by up to
        # one sampling gap; the measure is read off at the realized value
        vals = []
        for o in range(orders):
            count, sep = covering_net(space, idx, s, seed=COVER_SEED + o, slack=res)
            vals.append(count * (2 * sep) ** k * norm)
        values.append(float(np.mean(vals)))
    spread = (max(values) - min(values)) / 2
    return MeasureEstimate(values[1], k, scale, "covering", spread,
                           [{"scale": s, "value": v} for s, v in zip(scales, values)])


# ---------------------------------------------------------------------------
# separation


def components_of_complement(space, s_set) -> SeparationStats:
    """Components of the neighborhood graph after deleting the scale-thickening of S."""
    idx = as_indices(s_set)
    width = s_set.scale if isinstance(s_set, SampleSet) else 0.0
    if len(idx):
        d = space.nearest_dist(idx)
        removed = np.flatnonzero(d < width) if width > 0 else idx
        removed = np.union1d(removed, idx)
    else:
        removed = np.zeros(0, dtype=int)
    keep = np.setdiff1d(np.arange(space.n), removed)
    labels = np.full(space.n, -1)
    if len(keep) == 0:
        return SeparationStats(labels, 0, removed)
    sub = space.graph[keep][:, keep]
    n_comp, lab = csgraph.connected_components(sub, directed=False)
    # relabel by smallest member index so labels do not depend on scipy internals
    first = np.array([np.flatnonzero(lab == c)[0] for c in range(n_comp)])
    rank = np.empty(n_comp, dtype=int)
    rank[np.argsort(first)] = np.arange(n_comp)
    labels[keep] = rank[lab]
    return SeparationStats(labels, int(n_comp), removed)


def inradius(space, component, return_point: bool = False):
    """Largest distance from a point of ``component`` to the rest of the sample.

    The whole space has in-radius equal to its diameter by convention.
    """
    comp = np.asarray(component, dtype=int)
    if len(comp) == 0:
        raise ValueError("component must be nonempty")
    rest = np.setdiff1d(np.arange(space.n), comp)
    if len(rest) == 0:
        return (space.diameter, int(comp[0])) if return_point else space.diameter
    d = space.nearest_dist(rest, targets=comp)
    k = int(np.argmax(d))
    return (float(d[k]), int(comp[k])) if return_point else float(d[k])


def separation_radius(space, s_set) -> SeparationStats:
    stats = components_of_complement(space, s_set)
    for c in range(stats.n_components):
        r, x = inradius(space, stats.component(c), return_point=True)
        stats.inrads.append(r)
        stats.deepest.append(x)
    if stats.n_components >= 2:
        order = sorted(range(stats.n_components), key=lambda c: (-stats.inrads[c], c))
        a, b = order[0], order[1]
        stats.seprad = float(min(stats.inrads[a], stats.inrads[b]))
        x, y = stats.deepest[a], stats.deepest[b]
        idx = as_indices(s_set)
        dxy = float(space.nearest_dist(idx, targets=[x, y]).min()) if len(idx) else math.inf
        stats.separated_pairs = [{"x": x, "y": y, "components": [a, b], "dist_to_S": dxy}]
    return stats


def diameter_bound_check(space, s_set, L: float, spread: float | None = None) -> dict:
    """Test diam(S) >= seprad(S)/L - (2h + spread) on the sample.

    ``spread`` defaults to the thickening width of S, the resolution at
    which the separation radius is measured.
    """
    if L <= 0:
        raise ValueError("L must be positive")
    idx = as_indices(s_set)
    stats = separation_radius(space, s_set)
    diam = space.subset_diameter(idx) if len(idx) else 0.0
    if spread is None:
        spread = s_set.scale if isinstance(s_set, SampleSet) else 0.0
    tol = 2 * space.h + spread
    bound = stats.seprad / L
    margin = diam - (bound - tol)
    return {"ok": bool(margin >= 0), "diam": diam, "seprad": stats.seprad, "L": L,
            "bound": bound, "tolerance": tol, "margin": margin}


# ---------------------------------------------------------------------------
# slicing


def eilenberg_slices(space, center: int, r: float, bands: int,
                     shell_width: float | None = None, scale: float | None = None) -> dict:
    """Level-set measures of ``z -> d(center, z)`` over B(center, r).

    Band j covers ``[j, j+1) * r/bands``; its level set is represented by
    the sample points within ``shell_width/2`` of the band midpoint and
    measured in dimension ``n_man - 1``.  Returns the slices, the Riemann
    sum of slice measures, the measure of the ball and their ratio.
    """
    if bands < 4:
        raise ValueError("bands must be >= 4")
    if r <= 0 or r > space.diameter * (1 + 1e-12):
        raise ValueError("r must lie in (0, diam]")
    n = space.n_man
    spacing = space.meta.get("spacing", space.h / 2.5)
    if shell_width is None:
        shell_width = 1.5 * spacing
    if scale is None:
        scale = 2.0 * shell_width
    d = space.dist_from(center)
    dt = r / bands
    slices = []
    total = 0.0
    for j in range(bands):
        t = (j + 0.5) * dt
        shell = np.flatnonzero(np.abs(d - t) < shell_width / 2)
        if len(shell) == 0 or r < space.h:
            est = MeasureEstimate(0.0, n - 1, scale)
        else:
            est = hausdorff_estimate(space, shell, n - 1, scale=scale, check_resolution=False)
        slices.append((t, est))
        total += est.value * dt
    ball = np.flatnonzero(d < r)
    if r < space.h:
        ball_est = MeasureEstimate(0.0, n, scale)
        total = 0.0
    else:
        ball_est = hausdorff_estimate(space, ball, n, scale=scale, check_resolution=False)
    ratio = total / ball_est.value if ball_est.value > 0 else math.nan
    return {"center": int(center), "r": r, "bands": bands, "shell_width": shell_width,
            "scale": scale, "slices": slices, "integral": total, "ball": ball_est, "ratio": ratio}
