import json
import math

import numpy as np
import pytest
from scipy.spatial import cKDTree

from varietysample.errors import InfiniteBottlenecks
from varietysample.geom import BoundingBox, bounding_box
from varietysample.poly import parse_system
from varietysample.sample import (
    GridSpec,
    basic_sample,
    choose_delta,
    density_hypothesis,
    extra_sample,
    read_csv,
    total_sample,
    write_csv,
    write_json,
    write_obj,
)
from varietysample.solve import TrackSettings

from oracles import OCTIC, circle_line_points, octic_basic_count

CIRCLE = parse_system("x^2 + y^2 - 1")
ELLIPSE = parse_system("x^2/4 + y^2 - 1")


def test_choose_delta_examples():
    assert choose_delta(0.014, 10.0, 4) == pytest.approx(0.99 * 0.007)
    assert choose_delta(0.2, 0.1, 3) == pytest.approx(0.99 * 0.2 / math.sqrt(3))
    assert choose_delta(1.0, 0.1, 2) == pytest.approx(0.99 * 0.2 / math.sqrt(2))
    for bad in [(0, 1, 2), (1, -1, 2), (1, 1, 0)]:
        with pytest.raises(ValueError):
            choose_delta(*bad)


def test_chosen_delta_satisfies_strict_hypothesis():
    for eps, b2, n in [(0.3, 1, 2), (0.014, 0.5, 4), (1e-4, 3e-5, 7)]:
        assert density_hypothesis(choose_delta(eps, b2, n), eps, b2, n)
    assert not density_hypothesis(0.5, 1.0, 1.0, 4)


def test_grid_spec_validation():
    box = BoundingBox(np.zeros(2), 1.0)
    with pytest.raises(ValueError):
        GridSpec(0.5, np.array([0.5, 0.1]), box, 2, 1)
    with pytest.raises(ValueError):
        GridSpec(-0.5, np.array([0.1, 0.1]), box, 2, 1)
    g = GridSpec(0.5, np.array([0.25, 0.25]), box, 2, 1)
    np.testing.assert_allclose(g.axis(0), [-0.75, -0.25, 0.25, 0.75])
    assert g.points((0, 1)).shape == (16, 2)


def test_random_translation_in_range():
    box = BoundingBox(np.zeros(3), 1.0)
    for seed in range(20):
        g = GridSpec.random(0.3, box, 2, seed)
        assert np.all(g.translation >= 0) and np.all(g.translation < 0.3)


def test_circle_basic_sample_sixteen_points():
    box = bounding_box(CIRCLE, q=[0.01, -0.02])
    grid = GridSpec(0.5, np.array([0.25, 0.25]), box, 2, 1)
    s = basic_sample(CIRCLE, grid)
    assert len(s) == 16
    ref = circle_line_points(0.5, [0.25, 0.25], box.lower, box.upper)
    d, _ = cKDTree(ref).query(s.points)
    assert d.max() < 1e-10


def test_path_accounting_circle():
    box = bounding_box(CIRCLE, q=[0.3, 0.1])
    grid = GridSpec(0.5, np.array([0.1, 0.4]), box, 2, 1)
    s = basic_sample(CIRCLE, grid)
    grid_points = grid.count((0,)) + grid.count((1,))
    assert s.paths_tracked == 2 * grid_points


def test_example_curve_matches_root_oracle():
    F = parse_system(OCTIC)
    s = total_sample(F, 0.0692, TrackSettings(rng_seed=4), delta=0.0489)
    box = bounding_box(F, TrackSettings(rng_seed=4))
    ref = octic_basic_count(0.0489, s.translation[0], s.translation[1], box.lower, box.upper)
    assert s.basic_count == ref


def test_extra_sample_empty_for_curves():
    box = bounding_box(CIRCLE)
    grid = GridSpec(0.3, np.array([0.1, 0.2]), box, 2, 1)
    assert len(extra_sample(CIRCLE, grid, [0.3, 0.2])) == 0


def test_extra_sample_sphere_slices():
    S = parse_system("x^2 + y^2 + z^2 - 1")
    box = bounding_box(S)
    grid = GridSpec(0.3, np.array([0.1, 0.2, 0.05]), box, 3, 2)
    q = np.array([0.13, -0.21, 0.07])
    e = extra_sample(S, grid, q)
    for j in range(3):
        for g in grid.axis(j):
            if abs(g) < 0.99:
                on_slice = np.abs(e.points[:, j] - g) < 1e-12
                assert on_slice.sum() >= 1


def test_total_sample_needs_finite_bottlenecks():
    with pytest.raises(InfiniteBottlenecks):
        total_sample(CIRCLE, 0.5)
    s = total_sample(CIRCLE, 0.5, b2_override=1.0)
    assert s.epsilon_certified == 0.5


def ellipse_reference(m=100_000):
    th = np.linspace(0, 2 * np.pi, m, endpoint=False)
    return np.stack([2 * np.cos(th), np.sin(th)], axis=1)


def test_ellipse_certified_and_dense():
    s = total_sample(ELLIPSE, 0.3, TrackSettings(rng_seed=1))
    assert s.epsilon_certified == 0.3 and s.b2 == pytest.approx(1.0, abs=1e-6)
    d, _ = cKDTree(s.points).query(ellipse_reference())
    assert d.max() < 0.3


def test_sample_invariants():
    S = parse_system("x^2 + y^2 + z^2 - 1")
    s = total_sample(S, 0.4, b2_override=1.0)
    res = np.abs(S.compiled.values(s.points.astype(complex))).max()
    assert res <= 1e-8
    assert s.basic_count + s.extra_count == len(s)
    d, _ = cKDTree(s.points).query(s.points, k=2)
    assert d[:, 1].min() > 1e-6
    box = bounding_box(S)
    assert np.all(box.contains(s.points))


def test_halving_delta_never_loses_points():
    box = bounding_box(ELLIPSE)
    counts = []
    for delta in (0.4, 0.2, 0.1):
        g = GridSpec(delta, np.array([0.03, 0.07]), box, 2, 1)
        counts.append(len(basic_sample(ELLIPSE, g)))
    assert counts == sorted(counts)


def test_seed_determinism():
    a = total_sample(ELLIPSE, 0.3, TrackSettings(rng_seed=5))
    b = total_sample(ELLIPSE, 0.3, TrackSettings(rng_seed=5))
    np.testing.assert_array_equal(a.points, b.points)
    c = total_sample(ELLIPSE, 0.3, TrackSettings(rng_seed=6))
    assert not np.array_equal(a.translation, c.translation)


def test_exports(tmp_path):
    s = total_sample(CIRCLE, 0.8, b2_override=1.0, delta=0.5, translation=[0.25, 0.25])
    write_csv(s, tmp_path / "s.csv")
    np.testing.assert_array_equal(read_csv(tmp_path / "s.csv"), s.points)
    header = (tmp_path / "s.csv").read_text().splitlines()[0]
    assert header == "x,y,kind,t,g"
    write_json(s, tmp_path / "s.json", canonical=True)
    data = json.loads((tmp_path / "s.json").read_text())
    assert data["metadata"]["num_points"] == 16 and "timings" not in data["metadata"]
    assert data["provenance"][0]["kind"] == "basic"
    write_obj(s, tmp_path / "s.obj")
    lines = (tmp_path / "s.obj").read_text().splitlines()
    assert len(lines) == 16 and lines[0].startswith("v ") and lines[0].endswith(" 0")


def test_near_crossing_points_are_distinct():
    # the circle passes 5e-8 from the crossing (0.6, 0.8 + 5e-8): the vertical and
    # horizontal slices give two different sample points about 1e-7 apart
    box = BoundingBox(np.zeros(2), 1.01)
    grid = GridSpec(1.0, np.array([0.6, 0.8 + 5e-8]), box, 2, 1)
    s = basic_sample(CIRCLE, grid)
    assert len(s) == 8
    assert s.paths_tracked == 8
