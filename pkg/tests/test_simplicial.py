import itertools
import math

import numpy as np
import pytest

from isosep.experiments import latitude_set
from isosep.measure import SampleSet
from isosep.simplicial import (SimplicialComplex, Z2ChainComplex, betti_numbers, betti_z2,
                               boundary_matrix, separation_witness, skeleton, stable_witness)


# -- independent oracle ---------------------------------------------------------

def oracle_boundary(simplices, k):
    rows = sorted(s for s in simplices if len(s) == k)
    cols = sorted(s for s in simplices if len(s) == k + 1)
    pos = {s: i for i, s in enumerate(rows)}
    m = np.zeros((len(rows), len(cols)), dtype=np.uint8)
    for j, s in enumerate(cols):
        for v in s:
            m[pos[tuple(x for x in s if x != v)], j] = 1
    return m


def oracle_rank(m):
    m = m.copy() % 2
    r = 0
    rows, cols = m.shape
    for c in range(cols):
        piv = next((i for i in range(r, rows) if m[i, c]), None)
        if piv is None:
            continue
        m[[r, piv]] = m[[piv, r]]
        for i in range(rows):
            if i != r and m[i, c]:
                m[i] ^= m[r]
        r += 1
    return r


def chain_count(simplices, k):
    return sum(1 for s in simplices if len(s) == k + 1)


def oracle_betti(simplices, k):
    n_k = chain_count(simplices, k)
    if n_k == 0:
        return 0
    rk = oracle_rank(oracle_boundary(simplices, k)) if k > 0 else 0
    rk1 = oracle_rank(oracle_boundary(simplices, k + 1))
    return n_k - rk - rk1


def enumerated_betti(simplices, k):
    """dim ker - dim im by listing every chain (only for small chain groups)."""
    d_k = oracle_boundary(simplices, k) if k > 0 else np.zeros((0, chain_count(simplices, 0)), np.uint8)
    d_k1 = oracle_boundary(simplices, k + 1)
    n_k, n_k1 = d_k.shape[1], d_k1.shape[1]
    kernel = sum(1 for v in itertools.product((0, 1), repeat=n_k) if not (d_k @ np.array(v, int) % 2).any())
    image = {tuple(d_k1 @ np.array(v, int) % 2) for v in itertools.product((0, 1), repeat=n_k1)}
    return round(math.log2(kernel)) - round(math.log2(len(image)))


def random_complex(rng):
    nv = int(rng.integers(1, 9))
    maximal = []
    for _ in range(int(rng.integers(1, 7))):
        size = int(rng.integers(1, min(nv, 4) + 1))
        maximal.append(tuple(sorted(rng.choice(nv, size, replace=False).tolist())))
    return SimplicialComplex.from_maximal(maximal, vertex_count=nv)


# -- catalog ----------------------------------------------------------------------

def torus7():
    tri = []
    for i in range(7):
        tri.append((i, (i + 1) % 7, (i + 3) % 7))
        tri.append((i, (i + 2) % 7, (i + 3) % 7))
    return SimplicialComplex.from_maximal(tri)


def test_catalog_betti_numbers():
    circle = SimplicialComplex.from_maximal([(0, 1), (1, 2), (0, 2)])
    assert betti_numbers(circle) == [1, 1]
    sphere = skeleton(SimplicialComplex.full_simplex(3), 2)
    assert betti_numbers(sphere) == [1, 0, 1]
    t = torus7()
    assert (t.count(0), t.count(1), t.count(2)) == (7, 21, 14)
    assert betti_numbers(t) == [1, 2, 1]


def test_random_complexes_match_oracle():
    rng = np.random.default_rng(2024)
    enumerated = 0
    for _ in range(200):
        cx = random_complex(rng)
        for k in range(cx.dim + 1):
            expected = oracle_betti(cx.simplices, k)
            assert betti_z2(cx, k) == expected, (sorted(cx.simplices), k)
            if chain_count(cx.simplices, k) <= 12 and chain_count(cx.simplices, k + 1) <= 12:
                assert enumerated_betti(cx.simplices, k) == expected
                enumerated += 1
        assert sum((-1) ** k * b for k, b in enumerate(betti_numbers(cx))) == cx.euler_characteristic()
    assert enumerated > 200


def test_boundary_squares_to_zero():
    chain = Z2ChainComplex(torus7())
    assert chain.check_boundary_squared()
    d1 = boundary_matrix(torus7(), 1)
    d2 = boundary_matrix(torus7(), 2)
    assert not ((d1 @ d2) % 2).any()


def test_skeleton_examples():
    tri = SimplicialComplex.full_simplex(2)
    sk = skeleton(tri, 1)
    assert sk.count(2) == 0 and sk.count(1) == 3 and sk.count(0) == 3
    assert skeleton(tri, 5) == tri
    three_arc = SimplicialComplex.from_maximal([(0, 1), (1, 2), (0, 2)])
    assert skeleton(three_arc, 0).simplices == frozenset({(0,), (1,), (2,)})


def test_construction_errors():
    with pytest.raises(ValueError, match="downward"):
        SimplicialComplex(3, frozenset({(0, 1), (0,)}))
    with pytest.raises(ValueError, match="sorted"):
        SimplicialComplex(3, frozenset({(1, 0), (0,), (1,)}))
    with pytest.raises(ValueError, match="outside"):
        SimplicialComplex(2, frozenset({(5,)}))


def test_json_roundtrip():
    t = torus7()
    assert SimplicialComplex.from_json(t.to_json()) == t


def test_equator_witness_is_stable(sphere10k):
    S = latitude_set(sphere10k, math.pi / 2)
    s = 5 * sphere10k.meta["spacing"]
    w = stable_witness(sphere10k, S, [s, 1.5 * s])
    assert w["betti"] == [1, 1]
    assert w["stable"] and w["witness"] == 1


def test_short_arc_witness_is_zero(sphere10k):
    S = latitude_set(sphere10k, math.pi / 2)
    # keep a quarter of the equator band
    ang = np.arctan2(sphere10k.coords[S.indices, 2], sphere10k.coords[S.indices, 1])
    arc = SampleSet(S.indices[np.abs(ang) < math.pi / 4], S.scale)
    s = 5 * sphere10k.meta["spacing"]
    assert stable_witness(sphere10k, arc, [s, 1.5 * s])["betti"] == [0, 0]


def test_single_point_on_circle(circle360):
    assert separation_witness(circle360, SampleSet([0], 0.1), 0.1) == 1


def test_empty_set_warns(sphere3k):
    with pytest.warns(UserWarning):
        assert separation_witness(sphere3k, SampleSet([], 0.1), 0.2) == 0
