import math

import numpy as np
import pytest

from isosep.metric_core import (DisconnectedGraphError, FiniteMetricSpace, ManifoldSpec,
                                estimate_doubling, generate, load_space, save_space,
                                separated_in_ball)


def test_one_point_sphere():
    sp = generate(ManifoldSpec("sphere", {}, 1, 0))
    assert sp.n == 1
    assert sp.dist(0, 0) == 0.0
    assert estimate_doubling(sp, 5) == 1


def test_generation_is_deterministic():
    a = generate(ManifoldSpec("sphere", {}, 2000, 7))
    b = generate(ManifoldSpec("sphere", {}, 2000, 7))
    c = generate(ManifoldSpec("sphere", {}, 2000, 8))
    assert np.array_equal(a.coords, b.coords)
    assert not np.array_equal(a.coords, c.coords)


@pytest.mark.parametrize("spec, msg", [
    (ManifoldSpec("klein", {}, 10), "unknown manifold"),
    (ManifoldSpec("sphere", {"R": -1.0}, 10), "positive"),
    (ManifoldSpec("sphere", {"bogus": 1.0}, 10), "unknown parameters"),
    (ManifoldSpec("dumbbell_surface", {"eps": 1.5}, 10), "eps"),
    (ManifoldSpec("torus", {"R": 1.0, "r": 2.0}, 10), "minor radius"),
    (ManifoldSpec("sphere", {}, 0), "sample_count"),
])
def test_invalid_specs_rejected(spec, msg):
    with pytest.raises(ValueError, match=msg):
        generate(spec)


def test_antipodal_graph_geodesic(sphere10k):
    sp = sphere10k
    i = 0
    j = int(np.argmin(sp.coords @ sp.coords[i]))
    assert abs(sp.graph_geodesic(i, j) - math.pi) / math.pi < 0.03
    assert sp.graph_geodesic(i, i) == 0.0


def test_graph_geodesic_dominates_exact_distance(sphere3k):
    sp = sphere3k
    rng = np.random.default_rng(1)
    src = rng.choice(sp.n, 20, replace=False)
    from scipy.sparse import csgraph
    g = csgraph.dijkstra(sp.graph, directed=False, indices=src)
    exact = sp.pair_dists(src, np.arange(sp.n))
    assert np.all(g >= exact - 1e-12)
    # adjacent samples: the geodesic is the single edge
    nb = sp.graph[src[0]].indices[0]
    assert math.isclose(sp.graph_geodesic(int(src[0]), int(nb)), sp.dist(int(src[0]), int(nb)))


def test_graph_geodesic_ratio_improves_with_resolution():
    # stretch only vanishes when h -> 0 while h / spacing grows
    from scipy.sparse import csgraph
    errs, hs = [], []
    for n, factor in ((1000, 2.5), (4000, 3.5), (16000, 5.0)):
        sp = generate(ManifoldSpec("sphere", {"graph_factor": factor}, n, 3))
        hs.append(sp.h)
        src = np.random.default_rng(0).choice(sp.n, 30, replace=False)
        g = csgraph.dijkstra(sp.graph, directed=False, indices=src)
        exact = sp.pair_dists(src, np.arange(sp.n))
        far = exact > 0.5
        errs.append(float(np.mean(g[far] / exact[far])) - 1)
    assert hs[0] > hs[1] > hs[2]
    assert errs[0] > errs[1] > errs[2] > 0


def test_dumbbell_area_matches_model(dumbbell):
    from isosep.measure import hausdorff_estimate
    analytic = 2 * 4 * math.pi + 2 * math.pi * 0.1 * 1.0
    # the fillet trims a little area, so the model area sits just under this
    assert abs(dumbbell.meta["area"] - analytic) / analytic < 0.02
    est = hausdorff_estimate(dumbbell, np.arange(dumbbell.n), 2, scale=5 * dumbbell.meta["spacing"])
    assert abs(est.value - dumbbell.meta["area"]) / dumbbell.meta["area"] < 0.10


def test_dumbbell_is_connected_and_triangle_consistent(dumbbell):
    dumbbell.check_connected()
    assert dumbbell.audit_triangle(200) <= 1e-9


def test_disconnected_graph_names_components():
    sp = FiniteMetricSpace(np.array([[0.0], [0.1], [5.0]]), "graph", 1, 0.2)
    with pytest.raises(DisconnectedGraphError) as exc:
        sp.graph_geodesic(0, 2)
    assert exc.value.n_components == 2
    assert "first points [0, 2]" in str(exc.value)


def test_interval_doubling_at_most_five():
    sp = generate(ManifoldSpec("interval_test", {}, 1000, 0))
    assert estimate_doubling(sp, 200, seed=0) <= 5
    # exhaustive over every center at a few radii
    for r in (0.01, 0.1, 0.3):
        for c in range(0, 1000, 37):
            pts = separated_in_ball(sp, c, r)
            assert len(pts) <= 5
            d = sp.pair_dists(pts, pts) + np.eye(len(pts)) * 10
            assert d.min() >= r / 2 - 1e-12


def test_doubling_stabilizes_with_trials(sphere3k):
    a = estimate_doubling(sphere3k, 50, seed=0)
    b = estimate_doubling(sphere3k, 100, seed=0)
    assert b >= a
    assert b - a <= 2


def test_doubling_on_circle(circle360):
    # four points at spacing r/2 fit in an arc of length 2r
    assert estimate_doubling(circle360, 100, seed=0) == 4


def test_space_roundtrip(tmp_path, sphere3k):
    path = tmp_path / "space.txt"
    save_space(sphere3k, path)
    back = load_space(path)
    assert np.array_equal(back.coords, sphere3k.coords)
    assert np.array_equal(back.local_h, sphere3k.local_h)
    assert back.metric == "round" and back.n_man == 2
    assert back.meta["seed"] == 0


def test_load_rejects_foreign_files(tmp_path):
    p = tmp_path / "x.txt"
    p.write_text("hello\n")
    with pytest.raises(ValueError, match="not an"):
        load_space(p)


def test_scaled_space_distances(sphere3k):
    big = sphere3k.scaled(3.0)
    assert math.isclose(big.dist(0, 17), 3 * sphere3k.dist(0, 17), rel_tol=1e-12)
    assert math.isclose(big.diameter, 3 * sphere3k.diameter)


@pytest.mark.parametrize("lam", [0.2, 7.0])
def test_doubling_is_scale_invariant(sphere3k, lam):
    assert estimate_doubling(sphere3k.scaled(lam), 50, seed=0) == estimate_doubling(sphere3k, 50, seed=0)
