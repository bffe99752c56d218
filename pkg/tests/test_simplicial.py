import math
from itertools import combinations

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from varietysample.simplicial import (
    CECH,
    MODIFIED_VR,
    SimplicialComplex,
    betti,
    build_cech,
    build_modified_vr,
    certify,
    components,
    min_enclosing_ball,
)

from oracles import betti_bruteforce, random_closed_complex


def edges(K):
    return set(K.simplices[1])


# --- modified Vietoris-Rips ---------------------------------------------------

def test_far_pair_has_no_edge():
    K = build_modified_vr(np.array([[0.0, 0.0], [3.0, 0.0]]), 1.0)
    assert not edges(K)
    assert betti(K, 1).betti == [2, 0]


def test_close_triple_is_filled():
    P = np.array([[0.0, 0.0], [1.5, 0.0], [0.7, 1.2]])
    K = build_modified_vr(P, 1.0)
    assert K.simplices[2] == [(0, 1, 2)]
    assert betti(K, 1).betti == [1, 0]


def test_witness_edge():
    # a, b are 2.5 apart; c lies strictly within 2 of both
    P = np.array([[0.0, 0.0], [2.5, 0.0], [1.25, 1.56]])
    assert np.linalg.norm(P[2] - P[0]) < 2
    K = build_modified_vr(P, 1.0)
    assert edges(K) == {(0, 1), (0, 2), (1, 2)}
    assert K.simplices[2] == [(0, 1, 2)]
    assert not edges(build_modified_vr(P[:2], 1.0))


def test_witness_factor_caps_distance():
    # a witness within 2 eps of both ends already forces |a - b| <= 4 eps < 2 sqrt(8) eps,
    # so only a smaller factor can reject the pair
    P = np.array([[0.0, 0.0], [2.5, 0.0], [1.25, 1.56]])
    assert (0, 1) not in edges(build_modified_vr(P, 1.0, witness_factor=2.4))
    assert (0, 1) in edges(build_modified_vr(P, 1.0, witness_factor=2.6))


def test_empty_sample():
    K = build_modified_vr(np.zeros((0, 2)), 0.5)
    assert len(K) == 0


def brute_vr_edges(P, eps):
    D = np.linalg.norm(P[:, None] - P[None], axis=2)
    n = len(P)
    out = set()
    for a, b in combinations(range(n), 2):
        if D[a, b] <= 2 * eps:
            out.add((a, b))
        elif D[a, b] <= 2 * math.sqrt(8) * eps and any(
                D[a, c] <= 2 * eps and D[b, c] <= 2 * eps for c in range(n)):
            out.add((a, b))
    return out


@settings(max_examples=40, deadline=None)
@given(st.integers(0, 2**32 - 1), st.floats(0.05, 0.4))
def test_modified_vr_matches_rule_and_contains_plain_vr(seed, eps):
    P = np.random.default_rng(seed).uniform(-1, 1, size=(25, 2))
    K = build_modified_vr(P, eps)
    E = edges(K)
    assert E == brute_vr_edges(P, eps)
    D = np.linalg.norm(P[:, None] - P[None], axis=2)
    plain = {(a, b) for a, b in combinations(range(len(P)), 2) if D[a, b] <= 2 * eps}
    assert plain <= E
    assert K.is_closed()
    assert set(K.simplices[2]) == {t for t in combinations(range(len(P)), 3)
                                   if all(e in E for e in combinations(t, 2))}


# --- Cech ------------------------------------------------------------------------

def equilateral(s=1.0):
    return np.array([[0.0, 0.0], [s, 0.0], [s / 2, s * math.sqrt(3) / 2]])


def test_cech_equilateral_triangle():
    P = equilateral()
    K = build_cech(P, 1 / math.sqrt(3) + 1e-6)
    assert K.simplices[2] == [(0, 1, 2)]
    K = build_cech(P, 0.55)
    assert len(edges(K)) == 3 and not K.simplices[2]
    assert betti(K, 1).betti == [1, 1]


def test_cech_open_balls_exclude_exact_tie():
    # radius exactly eps: open balls only touch, so no edge
    K = build_cech(np.array([[0.0, 0.0], [1.0, 0.0]]), 0.5)
    assert not edges(K)


def test_cech_square_on_circle():
    P = np.array([[1.0, 0.0], [0.0, 1.0], [-1.0, 0.0], [0.0, -1.0]])
    K = build_cech(P, 0.8)
    assert edges(K) == {(0, 1), (1, 2), (2, 3), (0, 3)}
    assert betti(K, 1).betti == [1, 1]


def test_cech_max_dim_bounds():
    with pytest.raises(ValueError):
        build_cech(equilateral(), 1.0, max_dim=5)
    with pytest.raises(ValueError):
        build_cech(equilateral(), 0.0)


def test_min_enclosing_ball():
    c, r, _ = min_enclosing_ball(equilateral())
    assert r == pytest.approx(1 / math.sqrt(3))
    c, r, _ = min_enclosing_ball(np.array([[0.0, 0.0], [2.0, 0.0], [1.0, 0.1]]))
    assert r == pytest.approx(1.0) and np.allclose(c, [1, 0])


@settings(max_examples=30, deadline=None)
@given(st.integers(0, 2**32 - 1), st.floats(0.1, 0.6))
def test_cech_inside_vr(seed, eps):
    P = np.random.default_rng(seed).uniform(-1, 1, size=(15, 3))
    K = build_cech(P, eps, max_dim=3)
    assert K.is_closed()
    for k in range(1, 4):
        for s in K.simplices[k]:
            for a, b in combinations(s, 2):
                assert np.linalg.norm(P[a] - P[b]) <= 2 * eps
            _, r, _ = min_enclosing_ball(P[list(s)])
            assert r < eps + 1e-12


# --- Betti numbers ----------------------------------------------------------------

@pytest.mark.parametrize("maximal, expected", [
    ([(0, 1), (1, 2), (0, 2)], [1, 1]),
    ([(0, 1, 2)], [1, 0]),
])
def test_triangles(maximal, expected):
    assert betti(SimplicialComplex.from_simplices(maximal, MODIFIED_VR), 1).betti == expected


def test_hollow_tetrahedron():
    K = SimplicialComplex.from_simplices(combinations(range(4), 3), CECH)
    rep = betti(K, 2)
    assert rep.betti == [1, 0, 1]
    assert betti(K, 2, coefficients="rational").betti == [1, 0, 1]


def test_top_dim_beyond_cap():
    K = build_modified_vr(equilateral(), 1.0)
    with pytest.raises(ValueError):
        betti(K, 2)


def test_rational_differs_on_projective_plane():
    # minimal 6-vertex triangulation of RP^2: beta_1 = 1 over GF(2), 0 over Q
    rp2 = [(0, 1, 2), (0, 2, 3), (0, 3, 4), (0, 4, 5), (0, 1, 5), (1, 2, 4), (2, 3, 5),
           (1, 3, 4), (1, 3, 5), (2, 4, 5)]
    K = SimplicialComplex.from_simplices(rp2, CECH)
    assert betti(K, 2).betti == [1, 1, 1]
    assert betti(K, 2, coefficients="rational").betti == [1, 0, 0]


def test_components_union_find():
    assert components(5, [(0, 1), (3, 4)]) == 3


@pytest.mark.parametrize("seed", range(100))
def test_betti_matches_bruteforce(seed):
    rng = np.random.default_rng(seed)
    nv = int(rng.integers(3, 12))
    by_dim = random_closed_complex(rng, nv, 200, 3)
    maximal = [s for k in range(len(by_dim)) for s in by_dim[k]]
    K = SimplicialComplex.from_simplices(maximal, CECH, max_dim=4, num_vertices=nv)
    assert betti(K, 3).betti == betti_bruteforce(by_dim, 3)


# --- certificates ----------------------------------------------------------------

def vr_report():
    return betti(build_modified_vr(equilateral(), 1.0), 1)


def test_certify_wfs():
    assert certify(vr_report(), 0.06, "wfs", wfs=0.13835).certificate == "wfs_based"
    rep = certify(vr_report(), 0.2, "wfs", wfs=0.138)
    assert rep.certificate == "none" and "False" in rep.checked


def test_certify_reach():
    rep = betti(build_cech(equilateral(), 0.7), 1)
    assert certify(rep, 0.05, "reach", local_reach_min=0.05, sample_epsilon=0.025).certificate == "none"
    assert certify(rep, 0.03, "reach", local_reach_min=0.05, sample_epsilon=0.015).certificate == "reach_based"
    assert certify(rep, 0.03, "reach", local_reach_min=0.05, sample_epsilon=0.02).certificate == "none"


def test_certify_errors():
    with pytest.raises(ValueError):
        certify(vr_report(), 0.1, "reach", local_reach_min=1.0)
    with pytest.raises(ValueError):
        certify(vr_report(), 0.1, "wfs")
    with pytest.raises(ValueError):
        certify(vr_report(), 0.1, "other", wfs=1.0)


def test_complex_text_export():
    K = SimplicialComplex.from_simplices([(0, 1, 2)], MODIFIED_VR, epsilon=0.5)
    assert K.to_text().splitlines() == [
        "# kind modified_vr epsilon 0.5 vertices 3",
        "dim 0 count 3", "0", "1", "2",
        "dim 1 count 3", "0 1", "0 2", "1 2",
        "dim 2 count 1", "0 1 2",
        "dim 3 count 0",
    ]
