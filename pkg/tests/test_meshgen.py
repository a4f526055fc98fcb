import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from bbmsim.mesh import validate
from bbmsim.meshgen import (OPEN_SEA, PSLG, SHORE, LevelGrid, MeshgenError, MeshgenParams, Polyline, Raster,
                            build_pslg, find_intersections, marching_squares, mesh_from_level, mesh_report,
                            min_angles, raster_to_level, read_pgm, simplify_polyline, smooth_polyline,
                            triangulate_pslg)


def grid(f, x0=-1.0, x1=1.0, n=41):
    xs = np.linspace(x0, x1, n)
    X, Y = np.meshgrid(xs, xs)
    return LevelGrid(xs, xs.copy(), f(X, Y))


def point_in_polygon(p, poly):
    x, y = p
    inside = False
    n = len(poly)
    for i in range(n):
        (xa, ya), (xb, yb) = poly[i], poly[(i + 1) % n]
        if (ya > y) != (yb > y) and x < xa + (y - ya) * (xb - xa) / (yb - ya):
            inside = not inside
    return inside


# ---------------------------------------------------------------- PGM

def test_pgm_ascii_minimal():
    r = read_pgm(b"P2 2 1 255 0 255")
    assert (r.width, r.height, r.maxval) == (2, 1, 255)
    assert r.pixels.tolist() == [[0, 255]]


def test_pgm_binary_equals_ascii():
    ascii_ = b"P2\n# comment\n3 2\n255\n0 10 20\n30 40 255\n"
    binary = b"P5\n3 2\n255\n" + bytes([0, 10, 20, 30, 40, 255])
    assert read_pgm(ascii_) == read_pgm(binary)


def test_pgm_16bit():
    r = read_pgm(b"P5 2 1 1000\n" + (300).to_bytes(2, "big") + (1000).to_bytes(2, "big"))
    assert r.pixels.tolist() == [[300, 1000]]


@pytest.mark.parametrize("data, msg", [
    (b"P5 4 4 255\n" + bytes(10), "truncated"),
    (b"P2 2 2 255 1 2 3", "truncated"),
    (b"P6 1 1 255\n\x00", "magic"),
    (b"P2 1 1 0 0", "maxval"),
    (b"P2 1 1 70000 0", "maxval"),
    (b"P2 1 1 10 11", "exceeds"),
])
def test_pgm_errors(data, msg):
    with pytest.raises(MeshgenError, match=msg):
        read_pgm(data)


def test_raster_to_level_orientation():
    # top row dark (wet), bottom row bright
    r = Raster(2, 2, 255, np.array([[0, 0], [255, 255]]))
    lv = raster_to_level(r, 128, pixel_size=2.0, origin=(10.0, 20.0))
    assert lv.xs.tolist() == [11.0, 13.0] and lv.ys.tolist() == [21.0, 23.0]
    assert np.all(lv.values[1] < 0) and np.all(lv.values[0] > 0)
    inv = raster_to_level(r, 128, wet_dark=False)
    assert np.all(inv.values[1] > 0) and np.all(inv.values[0] < 0)


# ---------------------------------------------------- marching squares

def test_uniform_fields_have_no_contours():
    assert marching_squares(grid(lambda x, y: np.ones_like(x))) == []
    assert marching_squares(grid(lambda x, y: -np.ones_like(x))) == []


def test_circle_contour_accuracy():
    lv = grid(lambda x, y: 0.5 - np.hypot(x, y))  # wet outside the disk
    (c,) = marching_squares(lv)
    assert c.closed
    r = np.hypot(*c.points.T)
    h = lv.cell_size
    assert np.abs(r - 0.5).max() <= math.sqrt(2) * h
    # wet region (outside) on the left means the island is traversed clockwise
    assert c.signed_area() < 0
    assert abs(abs(c.signed_area()) - math.pi / 4) < 4 * h


def test_linear_field_is_exact():
    lv = grid(lambda x, y: 0.3 * x + 0.7 * y - 0.1)
    (c,) = marching_squares(lv)
    assert not c.closed
    assert np.abs(0.3 * c.points[:, 0] + 0.7 * c.points[:, 1] - 0.1).max() <= 1e-12
    # wet half (value < 0) lies to the left of the direction of travel
    d = c.points[-1] - c.points[0]
    left = c.points[0] + 0.5 * d + 0.1 * np.array([-d[1], d[0]])
    assert 0.3 * left[0] + 0.7 * left[1] - 0.1 < 0


def test_saddle_gives_simple_curves():
    lv = grid(lambda x, y: x * y + 0.01, n=20)
    for c in marching_squares(lv):
        assert len(np.unique(np.round(c.points, 12), axis=0)) == len(c.points)


# --------------------------------------------------- smoothing and DP

def test_smoothing_keeps_straight_lines():
    p = Polyline(np.column_stack([np.linspace(0, 1, 11), np.linspace(0, 2, 11)]))
    np.testing.assert_allclose(smooth_polyline(p, 20).points, p.points, atol=1e-14)


def test_smoothing_zero_iterations_is_identity():
    p = Polyline(np.random.default_rng(0).normal(size=(7, 2)), closed=True)
    assert np.array_equal(smooth_polyline(p, 0).points, p.points)


@settings(max_examples=50, deadline=None)
@given(st.integers(3, 40), st.integers(0, 2 ** 31), st.integers(1, 20), st.floats(0.05, 0.95))
def test_smoothing_properties(n, seed, iters, lam):
    rng = np.random.default_rng(seed)
    closed = Polyline(rng.normal(size=(n, 2)), closed=True)
    s = smooth_polyline(closed, iters, lam)
    np.testing.assert_allclose(s.points.mean(axis=0), closed.points.mean(axis=0), atol=1e-12)
    assert s.length() <= closed.length() * (1 + 1e-12)
    opened = Polyline(closed.points, closed=False)
    s = smooth_polyline(opened, iters, lam)
    assert np.array_equal(s.points[[0, -1]], opened.points[[0, -1]])
    assert s.length() <= opened.length() * (1 + 1e-12)


def test_dp_examples():
    p = Polyline(np.column_stack([np.arange(6.0), np.zeros(6)]))
    assert simplify_polyline(p, 0.0).points.tolist() == [[0, 0], [5, 0]]
    bump = Polyline([[0, 0], [1, 0.2], [2, 0]])
    assert len(simplify_polyline(bump, 0.1)) == 3
    assert len(simplify_polyline(bump, 0.3)) == 2
    zig = Polyline([[0, 0], [1, 1], [2, 0], [3, 1]])
    assert len(simplify_polyline(zig, 0.0)) == 4


@settings(max_examples=60, deadline=None)
@given(st.integers(2, 60), st.integers(0, 2 ** 31), st.floats(0.0, 1.0), st.booleans())
def test_dp_removed_points_stay_within_eps(n, seed, eps, closed):
    rng = np.random.default_rng(seed)
    pts = np.cumsum(rng.normal(size=(n, 2)), axis=0)
    if closed and n < 3:
        return
    poly = Polyline(pts, closed)
    s = simplify_polyline(poly, eps)
    kept = {tuple(q) for q in s.points}
    assert kept <= {tuple(q) for q in pts}
    ring = np.vstack([s.points, s.points[:1]]) if closed else s.points
    for q in pts:
        d = min(np.linalg.norm(q - (a + np.clip((q - a) @ (b - a) / max((b - a) @ (b - a), 1e-300), 0, 1) * (b - a)))
                for a, b in zip(ring[:-1], ring[1:]))
        assert d <= eps + 1e-9


# ------------------------------------------------------------------ PSLG

BOX = (0.0, 0.0, 4.0, 2.0)


def test_whole_box_is_open_sea():
    g = build_pslg([], BOX, box_wet=True)
    assert len(g.segments) == 4
    assert {lab for *_, lab in g.segments} == {OPEN_SEA}


def test_dry_box_without_contours_has_no_wet_region():
    with pytest.raises(MeshgenError, match="no wet region"):
        build_pslg([], BOX, box_wet=False)


def test_lake_is_all_shoreline():
    lv = grid(lambda x, y: np.hypot(x, y) - 0.5)  # wet inside the disk
    g = build_pslg(marching_squares(lv), lv.bbox, box_wet=False)
    assert {lab for *_, lab in g.segments} == {SHORE}


def test_half_plane_has_mixed_labels():
    lv = grid(lambda x, y: x - 0.05)  # wet on the left half
    g = build_pslg(marching_squares(lv), lv.bbox, box_wet=True)
    labels = [lab for *_, lab in g.segments]
    assert SHORE in labels and OPEN_SEA in labels
    seg = g.segment_array()
    shore_x = g.points[seg[np.array(labels) == SHORE]][..., 0]
    np.testing.assert_allclose(shore_x, 0.05, atol=1e-12)
    sea = g.points[seg[np.array(labels) == OPEN_SEA]]
    assert sea[..., 0].max() <= 0.05 + 1e-12


def test_small_loops_dropped():
    lv = grid(lambda x, y: np.minimum(np.hypot(x, y) - 0.5, np.hypot(x - 0.8, y - 0.8) - 0.06))
    lines = marching_squares(lv)
    assert len(lines) == 2
    g = build_pslg(lines, lv.bbox, box_wet=False, min_area=25 * lv.cell_size ** 2)
    assert np.hypot(*g.points.T).max() < 0.6


def test_self_intersection_detected():
    bow = PSLG(np.array([[0, 0], [1, 1], [1, 0], [0, 1]], float), [(0, 1, 1), (1, 2, 1), (2, 3, 1), (3, 0, 1)])
    assert find_intersections(bow)
    with pytest.raises(MeshgenError, match="self-intersecting"):
        build_pslg([Polyline(bow.points, closed=True)], (-1, -1, 2, 2), box_wet=True)


# ---------------------------------------------------------- triangulation

def square_pslg(hole=False):
    pts = [(0, 0), (1, 0), (1, 1), (0, 1)]
    segs = [(0, 1, 2), (1, 2, 2), (2, 3, 2), (3, 0, 2)]
    if hole:
        pts += [(0.4, 0.4), (0.4, 0.6), (0.6, 0.6), (0.6, 0.4)]  # clockwise
        segs += [(4, 5, 1), (5, 6, 1), (6, 7, 1), (7, 4, 1)]
    return PSLG(np.array(pts, float), segs)


def test_unit_square_refinement():
    m = triangulate_pslg(square_pslg(), MeshgenParams(max_area=0.01, min_angle=20))
    assert m.n_triangles >= 100
    assert m.areas.max() <= 0.01 * (1 + 1e-12)
    assert min_angles(m).min() >= 20.0
    assert m.total_area() == pytest.approx(1.0, rel=1e-12)
    assert validate(m) == []
    assert set(np.unique(m.edge_labels)) == {OPEN_SEA}


def test_square_with_hole():
    m = triangulate_pslg(square_pslg(hole=True), MeshgenParams(max_area=0.005, min_angle=25))
    c = m.points[m.triangles].mean(axis=1)
    hole = [(0.4, 0.4), (0.4, 0.6), (0.6, 0.6), (0.6, 0.4)]
    assert not any(point_in_polygon(q, hole) for q in c)
    assert m.total_area() == pytest.approx(0.96, rel=1e-12)
    assert min_angles(m).min() >= 25.0
    r = mesh_report(m)
    assert set(r.label_census) == {1, 2}
    assert r.label_census[1] >= 4


def test_open_chain_rejected():
    g = PSLG(np.array([[0, 0], [1, 0], [1, 1], [0, 1]], float), [(0, 1, 2), (1, 2, 2), (2, 3, 2)])
    with pytest.raises(MeshgenError, match="does not enclose"):
        triangulate_pslg(g, MeshgenParams())


def test_triangulation_is_deterministic():
    p = MeshgenParams(max_area=0.003)
    a = triangulate_pslg(square_pslg(hole=True), p)
    b = triangulate_pslg(square_pslg(hole=True), p)
    assert a.same_as(b) and np.array_equal(a.triangles, b.triangles)


def test_element_budget():
    with pytest.raises(MeshgenError):
        triangulate_pslg(square_pslg(), MeshgenParams(max_area=1e-4, max_elements=500))


def test_params_validation():
    with pytest.raises(ValueError):
        MeshgenParams(min_angle=30)
    with pytest.raises(ValueError):
        MeshgenParams(max_area=0)


def test_island_pipeline():
    lv = grid(lambda x, y: 0.5 - np.hypot(x, y), n=61)
    m = mesh_from_level(lv, MeshgenParams(max_area=0.01))
    assert validate(m) == []
    assert min_angles(m).min() >= 20.0
    assert m.total_area() == pytest.approx(4 - math.pi / 4, rel=0.02)
    r = mesh_report(m)
    assert r.label_census.keys() == {1, 2}
    shore = m.points[np.unique(m.boundary_edges[m.edge_labels == SHORE])]
    np.testing.assert_allclose(np.hypot(*shore.T), 0.5, atol=2 * lv.cell_size)
