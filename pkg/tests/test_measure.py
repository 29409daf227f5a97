import math

import numpy as np
import pytest

from isosep.experiments import latitude_set, neck_loop
from isosep.measure import (SampleSet, components_of_complement, diameter_bound_check,
                            eilenberg_slices, hausdorff_estimate, inradius, separation_radius)
from isosep.metric_core import ManifoldSpec, dumbbell_profile, generate


@pytest.fixture(scope="module")
def segment():
    return generate(ManifoldSpec("interval_test", {}, 1000, 0))


def test_empty_and_counting(segment):
    assert hausdorff_estimate(segment, SampleSet([], 0.01), 1).value == 0.0
    assert hausdorff_estimate(segment, np.arange(17), 0, scale=0.1).value == 17.0


@pytest.mark.parametrize("spacings", [10, 15])
def test_unit_segment_length(segment, spacings):
    est = hausdorff_estimate(segment, np.arange(segment.n), 1, scale=spacings * segment.meta["spacing"])
    assert abs(est.value - 1.0) < 0.05
    assert len(est.per_scale) == 3


def test_unit_sphere_area(sphere10k):
    est = hausdorff_estimate(sphere10k, np.arange(sphere10k.n), 2, scale=5 * sphere10k.meta["spacing"])
    assert abs(est.value - 4 * math.pi) / (4 * math.pi) < 0.10


def test_scale_below_resolution_rejected(segment):
    with pytest.raises(ValueError, match="resolution"):
        hausdorff_estimate(segment, np.arange(segment.n), 1, scale=1e-3)


@pytest.mark.parametrize("lam", [0.5, 2.0, 3.7])
def test_rescaling_multiplies_by_lambda_power(sphere3k, lam):
    idx = np.arange(sphere3k.n)
    s = 5 * sphere3k.meta["spacing"]
    a = hausdorff_estimate(sphere3k, idx, 2, scale=s).value
    b = hausdorff_estimate(sphere3k.scaled(lam), idx, 2, scale=lam * s).value
    assert math.isclose(b, lam ** 2 * a, rel_tol=1e-9)


def test_empty_set_leaves_one_component(sphere3k):
    assert components_of_complement(sphere3k, SampleSet([], 0.1)).n_components == 1
    assert separation_radius(sphere3k, SampleSet([], 0.1)).seprad == 0.0


def test_equator_splits_sphere_at_poles(sphere10k):
    S = latitude_set(sphere10k, math.pi / 2)
    stats = separation_radius(sphere10k, S)
    assert stats.n_components == 2
    north = int(np.argmax(sphere10k.coords[:, 0]))
    south = int(np.argmin(sphere10k.coords[:, 0]))
    assert {stats.labels[north], stats.labels[south]} == {0, 1}
    # hemisphere in-radius: pole to the removed band
    assert abs(stats.seprad - math.pi / 2) / (math.pi / 2) < 0.05
    for r in stats.inrads:
        assert abs(r - math.pi / 2) / (math.pi / 2) < 0.05


def test_whole_space_inradius_is_diameter(sphere3k):
    assert inradius(sphere3k, np.arange(sphere3k.n)) == sphere3k.diameter


def test_isolated_point_inradius_small(sphere3k):
    assert inradius(sphere3k, [5]) <= sphere3k.h


def test_neck_loop_splits_dumbbell(dumbbell):
    S = neck_loop(dumbbell)
    stats = separation_radius(dumbbell, S)
    assert stats.n_components == 2
    x = dumbbell.coords[:, 0]
    left, right = int(np.argmin(x)), int(np.argmax(x))
    assert stats.labels[left] != stats.labels[right]
    # in-radius of a bell: surface distance from its outer pole to the neck middle
    _, _, s = dumbbell_profile(0.1, 200001)
    analytic = s[-1] / 2
    assert abs(stats.seprad - analytic) / analytic < 0.05


def test_diameter_bound(sphere10k, dumbbell):
    assert diameter_bound_check(sphere10k, SampleSet([], 0.1), 1.0)["ok"]
    eq = diameter_bound_check(sphere10k, latitude_set(sphere10k, math.pi / 2), 1.0)
    assert eq["ok"] and abs(eq["diam"] - math.pi) < 0.05
    neck = diameter_bound_check(dumbbell, neck_loop(dumbbell), dumbbell.meta["L_model"])
    assert neck["ok"]
    assert neck["margin"] > 0


def test_slices_below_graph_scale_are_empty(sphere3k):
    out = eilenberg_slices(sphere3k, 0, sphere3k.h / 2, 4)
    assert out["integral"] == 0.0
    assert all(e.value == 0.0 for _, e in out["slices"])


def test_slices_integrate_to_ball_area(sphere10k):
    s = 3 * sphere10k.meta["spacing"]
    out = eilenberg_slices(sphere10k, 100, 1.0, 16, scale=s)
    analytic = 2 * math.pi * (1 - math.cos(1.0))
    assert abs(out["integral"] - analytic) / analytic < 0.10
    assert abs(out["ratio"] - 1) < 0.15


def test_slices_reject_bad_arguments(sphere3k):
    with pytest.raises(ValueError):
        eilenberg_slices(sphere3k, 0, 1.0, 3)
    with pytest.raises(ValueError):
        eilenberg_slices(sphere3k, 0, 10.0, 8)


def test_sample_set_json_roundtrip():
    s = SampleSet([3, 1, 2, 3], 0.5, "level_set", "band")
    back = SampleSet.from_json(s.to_json())
    assert back.indices.tolist() == [1, 2, 3]
    assert back.role == "level_set" and back.scale == 0.5
    with pytest.raises(ValueError):
        SampleSet([1], 0.0)
    with pytest.raises(ValueError):
        SampleSet([1], 1.0, "blob")
