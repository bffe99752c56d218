import math

import numpy as np
import pytest

from varietysample.errors import DegenerateNormalLocus, EmptyVarietyError
from varietysample.geom import (
    bottleneck_system,
    bottlenecks,
    bounding_box,
    normal_locus,
    slice,
    slice_family,
)
from varietysample.poly import parse_system
from varietysample.solve import TrackSettings

from oracles import OCTIC, octic_slice_y

CIRCLE = parse_system("x^2 + y^2 - 1")
ELLIPSE = parse_system("x^2/4 + y^2 - 1")


def test_normal_locus_circle():
    nl = normal_locus(CIRCLE, [2.0, 0.0])
    pts = nl.critical_points[np.argsort(nl.critical_points[:, 0])]
    np.testing.assert_allclose(pts, [[-1, 0], [1, 0]], atol=1e-10)
    assert nl.edd_observed >= len(pts)


def test_normal_locus_ellipse_edd():
    nl = normal_locus(ELLIPSE, [0.31, 0.17])
    assert nl.edd_observed == 4
    x = nl.critical_points
    J = ELLIPSE.jacobian(x[0])
    assert abs(ELLIPSE.evaluate(x[0])[0]) < 1e-8
    # x - q is parallel to the gradient
    d = x[0] - [0.31, 0.17]
    assert abs(d[0] * J[0, 1].real - d[1] * J[0, 0].real) < 1e-8


def test_normal_locus_centre_of_circle_is_degenerate():
    with pytest.raises(DegenerateNormalLocus):
        normal_locus(CIRCLE, [0.0, 0.0])


def test_normal_locus_hits_every_component():
    two = parse_system("(x^2 + y^2 - 1) * ((x - 4)^2 + y^2 - 1)")
    nl = normal_locus(two, [1.7, 0.3])
    centres = np.array([[0, 0], [4, 0]])
    near = {int(np.argmin(np.linalg.norm(centres - p, axis=1))) for p in nl.critical_points}
    assert near == {0, 1}


def test_bounding_box_circle():
    q = np.array([0.3, 0.1])
    box = bounding_box(CIRCLE, q=q)
    assert math.isclose(box.half_width, (1 + np.linalg.norm(q)) * 1.01, rel_tol=1e-9)
    np.testing.assert_array_equal(box.center, q)


def test_bounding_box_sphere():
    S = parse_system("x^2 + y^2 + z^2 - 1")
    q = np.array([0.05, -0.1, 0.2])
    box = bounding_box(S, q=q)
    assert math.isclose(box.half_width, (1 + np.linalg.norm(q)) * 1.01, rel_tol=1e-9)


def test_bounding_box_empty_variety():
    with pytest.raises(EmptyVarietyError):
        bounding_box(parse_system("x^2 + y^2 + 1"))


def test_slice_circle():
    np.testing.assert_allclose(sorted(slice(CIRCLE, [0], [0.0])[:, 1]), [-1, 1], atol=1e-10)
    assert len(slice(CIRCLE, [0], [2.0])) == 0


def test_slice_example_curve_against_roots():
    F = parse_system(OCTIC)
    got = np.sort(slice(F, [0], [0.0])[:, 1])
    np.testing.assert_allclose(got, octic_slice_y(0.0), atol=1e-8)


def test_slice_family_many_grid_points():
    F = parse_system(OCTIC)
    grid = np.linspace(-1.5, 1.5, 31)[:, None]
    fam = slice_family(F, (0,), grid)
    assert fam.paths_tracked == fam.start_size * len(grid)
    # degree 6 in y: two of the eight intersections of a vertical line are at infinity
    assert fam.start_size == 6
    for i, g in enumerate(grid[:, 0]):
        got = np.sort(fam.points[fam.group == i][:, 1])
        np.testing.assert_allclose(got, octic_slice_y(g), atol=1e-7)


def test_slice_must_be_square():
    S = parse_system("x^2 + y^2 + z^2 - 1")
    with pytest.raises(ValueError):
        slice(S, [0], [0.1])


def test_bottlenecks_ellipse():
    rep = bottlenecks(ELLIPSE)
    assert rep.finite
    assert abs(rep.b2 - 1) <= 1e-6
    assert len(rep.pairs) == 2
    radii = sorted(rep.radii)
    np.testing.assert_allclose(radii, [1, 2], atol=1e-6)
    ends = {tuple(np.round(p, 6) + 0.0) for a, b, _ in rep.pairs for p in (a, b)}
    assert ends == {(0.0, 1.0), (0.0, -1.0), (2.0, 0.0), (-2.0, 0.0)}


def test_bottlenecks_circle_not_finite():
    rep = bottlenecks(CIRCLE)
    assert not rep.finite and rep.b2 is None
    assert rep.min_radius == pytest.approx(1.0, abs=1e-6)


def test_bottleneck_pairs_are_valid_and_unordered():
    F = parse_system("x^4 + y^4 + 0.3*x^2*y - 1.3*y^2 - 1")
    rep = bottlenecks(F, TrackSettings(rng_seed=2))
    assert rep.finite and rep.pairs
    seen = set()
    for a, b, r in rep.pairs:
        assert tuple(a) < tuple(b)
        for p in (a, b):
            assert abs(F.evaluate(p)[0]) < 1e-8
            g = F.jacobian(p)[0].real
            d = a - b
            M = np.array([d / np.linalg.norm(d), g / np.linalg.norm(g)])
            assert np.linalg.svd(M, compute_uv=False)[-1] < 1e-6
        assert math.isclose(r, np.linalg.norm(a - b) / 2)
        key = tuple(np.round(np.concatenate([a, b]), 5))
        assert key not in seen
        seen.add(key)
    assert rep.b2 == min(rep.radii)


def test_bottleneck_system_is_square():
    B = bottleneck_system(parse_system("x*y + y^2 - 2*z*w; x^2 + y^2 + z^2 + w^2 - 1"))
    assert B.num_vars == 8 and B.codim == 8


def test_example_curve_bottleneck_radius():
    rep = bottlenecks(parse_system(OCTIC))
    assert rep.finite
    # the narrowest pair is 0.13835 apart, i.e. radius 0.0692
    assert 2 * rep.b2 == pytest.approx(0.13835, abs=2e-4)
    assert rep.paths_tracked == 4096
