import json
import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

import oracles
from tracestab.convex2d import (
    ConvexPolygon,
    Disc,
    GeometryError,
    PolygonFormatError,
    area_perimeter,
    asymmetry_indices,
    g_modulus,
    hausdorff_distance,
    inner_parallel,
    inradius,
    nearly_spherical_check,
    outer_parallel_area,
    polygon_from_json,
    polygon_to_json,
    quermassintegrals_2d,
    radial_graph_norms,
    random_convex_polygon,
    rectangle,
    regular_polygon,
    steiner_point_and_ball,
)

# frozen from oracles.brute_asymmetry (support-function grid search, see test below)
SQUARE_STAR = 0.13661977236758144
SQUARE_SHARP = 0.1429171976387913

polygons = st.builds(
    lambda n, seed: random_convex_polygon(n, seed, target_perimeter=2 * math.pi),
    st.integers(3, 24),
    st.integers(0, 10**6),
)


def unit_square():
    return ConvexPolygon([[0, 0], [1, 0], [1, 1], [0, 1]])


# ----------------------------------------------------------------- construction
def test_rejects_degenerate_and_clockwise_input():
    with pytest.raises(GeometryError):
        ConvexPolygon([[0, 0], [1, 0]])
    with pytest.raises(GeometryError):
        ConvexPolygon([[0, 0], [0, 1], [1, 1], [1, 0]])  # clockwise
    with pytest.raises(GeometryError):
        ConvexPolygon([[0, 0], [2, 0], [1, 1], [2, 2], [0, 2]])  # reflex


def test_cleans_duplicates_and_collinear_points():
    p = ConvexPolygon([[0, 0], [0.5, 0], [1, 0], [1, 0], [1, 1], [0, 1]])
    assert p.n == 4
    assert not p.vertices.flags.writeable


def test_area_perimeter_and_quermass():
    sq = unit_square()
    assert area_perimeter(sq) == (1.0, 4.0)
    assert quermassintegrals_2d(sq) == (1.0, 2.0, math.pi)
    tri = ConvexPolygon([[0, 0], [3, 0], [0, 4]])
    assert tri.area == 6.0 and tri.perimeter == 12.0


# ----------------------------------------------------------------- parallel bodies
def test_inradius_closed_forms():
    assert inradius(rectangle(3.0, 1.0)) == pytest.approx(0.5, abs=1e-12)
    # right triangle 3-4-5: r = (a + b - c) / 2
    assert inradius(ConvexPolygon([[0, 0], [3, 0], [0, 4]])) == pytest.approx(1.0, abs=1e-12)
    assert unit_square().profile.inradius == pytest.approx(0.5, abs=1e-15)


def test_inner_parallel_against_halfspace_oracle():
    poly = random_convex_polygon(9, 3)
    rho = poly.profile.inradius
    for t in np.linspace(0, rho * 0.999, 12):
        ip = inner_parallel(poly, t)
        assert ip.area == pytest.approx(oracles.inner_parallel_area(poly.vertices, t), rel=1e-9, abs=1e-14)
        assert poly.profile.area(t) == pytest.approx(ip.area, rel=1e-9, abs=1e-13)
        assert poly.profile.perimeter(t) == pytest.approx(ip.perimeter, rel=1e-9, abs=1e-13)
    assert inner_parallel(poly, rho * 1.001) is None


def test_steiner_formula_square():
    sq = unit_square()
    assert outer_parallel_area(sq, 0.5) == pytest.approx(1 + 4 * 0.5 + math.pi * 0.25, abs=1e-14)


@settings(max_examples=40, deadline=None)
@given(poly=polygons, r=st.floats(0.0, 3.0))
def test_steiner_formula_property(poly, r):
    assert abs(outer_parallel_area(poly, r) - (poly.area + poly.perimeter * r + math.pi * r * r)) <= 1e-12


@settings(max_examples=40, deadline=None)
@given(poly=polygons)
def test_inner_parallel_slope_bound(poly):
    prof = poly.profile
    assert np.all(prof.perimeter_slope() <= -2 * math.pi + 1e-6)
    ts = np.linspace(0, prof.inradius, 50)
    P = prof.perimeter(ts)
    A = prof.area(ts)
    assert np.all(np.diff(P) <= 1e-12) and np.all(np.diff(A) <= 1e-12)
    # finite differences away from events reproduce the stored slope
    mid = 0.5 * (prof.times[:-1] + prof.times[1:])
    h = 1e-7 * prof.inradius
    fd = (prof.perimeter(mid + h) - prof.perimeter(mid - h)) / (2 * h)
    np.testing.assert_allclose(fd, prof.perimeter_slope(mid), rtol=1e-5)


# ----------------------------------------------------------------- Steiner ball and Hausdorff
def test_steiner_point_against_exterior_angle_oracle():
    tri = ConvexPolygon([[0, 0], [1, 0], [0, 1]])
    sb = steiner_point_and_ball(tri)
    np.testing.assert_allclose(sb.center, [0.375, 0.375], atol=1e-14)
    assert 2 * math.pi * sb.radius == pytest.approx(tri.perimeter, rel=1e-13)
    poly = random_convex_polygon(11, 5)
    np.testing.assert_allclose(steiner_point_and_ball(poly).center, oracles.steiner_point(poly.vertices), atol=1e-13)


@settings(max_examples=30, deadline=None)
@given(poly=polygons)
def test_steiner_ball_invariants(poly):
    sb = steiner_point_and_ball(poly)
    assert 2 * math.pi * sb.radius == pytest.approx(poly.perimeter, rel=1e-12)
    assert poly.contains(np.asarray(sb.center))


def test_hausdorff_distances():
    a, b = Disc((0, 0), 1.0), Disc((3, 4), 2.0)
    assert hausdorff_distance(a, b) == 6.0
    sq = unit_square()
    assert hausdorff_distance(sq, sq.translated([0.25, 0])) == pytest.approx(0.25)
    d = Disc((0.5, 0.5), 0.6)
    assert hausdorff_distance(sq, d) == pytest.approx(oracles.hausdorff_poly_disc(sq.vertices, d.center, d.radius), abs=1e-9)


@settings(max_examples=25, deadline=None)
@given(poly=polygons, cx=st.floats(-0.5, 0.5), cy=st.floats(-0.5, 0.5), r=st.floats(0.1, 2.0))
def test_polygon_disc_hausdorff_matches_support_functions(poly, cx, cy, r):
    # the support-function oracle samples directions, so it can only under-estimate slightly
    exact = hausdorff_distance(poly, Disc((cx, cy), r))
    approx = oracles.hausdorff_poly_disc(poly.vertices, (cx, cy), r)
    assert approx <= exact + 1e-12
    assert exact - approx <= 1e-6


# ----------------------------------------------------------------- asymmetry
def test_square_asymmetry_against_grid_oracle():
    assert oracles.brute_asymmetry(unit_square().vertices, 2 / math.pi, (0.3, 0.3), (0.7, 0.7), n=21) == pytest.approx(SQUARE_STAR, abs=1e-12)
    idx = asymmetry_indices(unit_square())
    assert idx.star == pytest.approx(2 / math.pi - 0.5, abs=1e-6)
    assert idx.star == pytest.approx(SQUARE_STAR, abs=1e-9)
    assert idx.sharp == pytest.approx(SQUARE_SHARP, abs=1e-9)
    np.testing.assert_allclose(idx.optimal_center_star, [0.5, 0.5], atol=1e-6)


def test_fine_regular_polygon_is_nearly_a_disc():
    idx = asymmetry_indices(regular_polygon(512).with_perimeter(2 * math.pi))
    assert 0 < idx.star < 1e-4


@settings(max_examples=10, deadline=None)
@given(poly=polygons, angle=st.floats(0, 2 * math.pi), dx=st.floats(-3, 3), dy=st.floats(-3, 3))
def test_asymmetry_rigid_motion_invariance(poly, angle, dx, dy):
    moved = poly.rotated(angle).translated([dx, dy])
    a, b = asymmetry_indices(poly), asymmetry_indices(moved)
    assert b.star == pytest.approx(a.star, abs=1e-8)
    assert a.star >= 0 and a.sharp >= 0


def test_g_modulus_branches():
    assert g_modulus(2, 0.3) == pytest.approx(0.09)
    assert g_modulus(4, 2.0) == pytest.approx(2.0**2.5)
    y = g_modulus(3, 0.5)
    assert math.sqrt(y * math.log(1 / y)) == pytest.approx(0.25, rel=1e-12)
    with pytest.raises(ValueError):
        g_modulus(3, 0.9)


# ----------------------------------------------------------------- nearly spherical
def test_nearly_spherical_disc_and_square():
    disc = regular_polygon(256).with_perimeter(2 * math.pi)
    assert nearly_spherical_check(disc, 1.0).is_nearly_spherical
    sq = unit_square().with_perimeter(2 * math.pi)
    res = nearly_spherical_check(sq, 1.0)
    assert not res.is_nearly_spherical
    sup_u, lip = radial_graph_norms(sq, 1.0, res.center)
    half = math.pi / 4
    # inscribed circle of the square sits at π/4 < 1, corners at π/(2√2) > 1
    assert sup_u == pytest.approx(1 - half, rel=1e-12)
    # corner of a square of half-width a seen from the centre: |x|sqrt(|x|^2-a^2)/a = a√2
    assert lip == pytest.approx(half * math.sqrt(2), rel=1e-12)


# ----------------------------------------------------------------- sampling and I/O
@settings(max_examples=20, deadline=None)
@given(n=st.integers(3, 40), seed=st.integers(0, 10**6))
def test_random_polygon_contract(n, seed):
    p = random_convex_polygon(n, seed, target_perimeter=5.0)
    assert p.n == n
    assert p.perimeter == pytest.approx(5.0, rel=1e-13)
    q = random_convex_polygon(n, seed, target_perimeter=5.0)
    np.testing.assert_array_equal(p.vertices, q.vertices)


def test_json_round_trip(tmp_path):
    poly = random_convex_polygon(7, 1)
    back = polygon_from_json(polygon_to_json(poly))
    np.testing.assert_array_equal(back.vertices, poly.vertices)


@pytest.mark.parametrize(
    "text, line, col, fragment",
    [
        ('{"vertices": [[0,0],[1,0],[0.5,0],[0,1]]}', 1, 21, "collinear"),
        ('{"vertices": [[0,0],[0,1],[1,1],[1,0]]}', 1, 21, "clockwise"),
        ('{"vertices":\n  [[0,0],\n   [1,"a"],\n   [0,1]]}', 3, 4, "finite"),
        ('{"vertices": [[0,0],[1,0]]}', 1, 15, "at least 3"),
        ('{"vertices": [[0,0],[1,0]', 1, 26, ""),
    ],
)
def test_json_errors_carry_positions(text, line, col, fragment):
    with pytest.raises(PolygonFormatError) as info:
        polygon_from_json(text)
    assert (info.value.lineno, info.value.colno) == (line, col)
    assert fragment in str(info.value)


def test_json_rejects_missing_key():
    with pytest.raises(PolygonFormatError):
        polygon_from_json(json.dumps({"points": []}))
