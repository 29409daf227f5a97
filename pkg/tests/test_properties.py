import math

import numpy as np
from hypothesis import given, settings, strategies as st
from hypothesis.extra.numpy import arrays

from isosep.deformation import BarycentricPoint, radial_project, ray_parameter
from isosep.measure import hausdorff_estimate
from isosep.metric_core import FiniteMetricSpace
from isosep.nets_nerve import brute_force_nerve, build_cover, nerve, partition_of_unity
from isosep.simplicial import SimplicialComplex, betti_numbers

weights = st.lists(st.floats(0.01, 1.0), min_size=2, max_size=6)


@given(weights, st.data())
def test_radial_projection_is_collinear(w, data):
    m = len(w)
    x = BarycentricPoint(tuple(range(m)), np.array(w) / sum(w))
    raw = np.array(data.draw(st.lists(st.floats(0.05, 1.0), min_size=m, max_size=m)))
    y = BarycentricPoint(x.simplex, 0.5 * raw / raw.sum() + 0.5 / m)
    if np.linalg.norm(x.coords - y.coords) < 1e-6:
        return
    z = radial_project(y, x)
    t, resid = ray_parameter(y, x, z)
    assert resid <= 1e-12
    assert t >= 1 - 1e-12
    assert z.on_boundary()
    assert abs(z.coords.sum() - 1) <= 1e-12


members = st.lists(st.sets(st.integers(0, 30), min_size=1, max_size=10), min_size=1, max_size=12)


@given(members)
def test_nerve_equals_brute_force(sets):
    m = [sorted(s) for s in sets]
    assert nerve(m) == brute_force_nerve(m)


@given(members)
def test_euler_characteristic_of_nerve(sets):
    cx = nerve([sorted(s) for s in sets])
    chi = sum((-1) ** k * b for k, b in enumerate(betti_numbers(cx)))
    assert chi == cx.euler_characteristic()


@settings(max_examples=25, deadline=None)
@given(arrays(np.float64, (60, 2), elements=st.floats(0, 1)), st.floats(0.3, 0.9))
def test_partition_of_unity_sums_to_one(coords, eps):
    sp = FiniteMetricSpace(coords, "euclidean", 2, 0.3)
    cover = build_cover(sp, eps)
    pou = partition_of_unity(sp, cover, audit_pairs=0)
    sums = np.asarray(pou.values.sum(axis=1)).ravel()
    assert np.abs(sums - 1).max() <= 1e-12
    for p, inside in enumerate(cover.membership(sp.n)):
        assert set(pou.row(p)[0].tolist()) <= set(inside)


@settings(max_examples=20, deadline=None)
@given(st.floats(0.1, 10.0), st.integers(0, 1))
def test_measure_scales_with_lambda(lam, k):
    x = np.linspace(0, 1, 201)
    sp = FiniteMetricSpace(x[:, None], "euclidean", 1, 0.0125)
    a = hausdorff_estimate(sp, np.arange(sp.n), k, scale=0.05).value
    b = hausdorff_estimate(sp.scaled(lam), np.arange(sp.n), k, scale=0.05 * lam).value
    assert math.isclose(b, lam ** k * a, rel_tol=1e-9)


@given(st.integers(1, 6))
def test_full_simplex_is_acyclic(d):
    assert betti_numbers(SimplicialComplex.full_simplex(d)) == [1] + [0] * d
