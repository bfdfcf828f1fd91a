import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from curveremap.geometry import (Aabb, CurvedPolygon, CurveSpan, GeometryError,
                                 ParamCurve, Point2, curve_bbox, curve_deriv,
                                 curve_eval, point_in_polygon,
                                 polygon_from_points, straight_span,
                                 validate_curve)


def test_point_rejects_nonfinite():
    with pytest.raises(GeometryError):
        Point2(float("nan"), 0.0)


def test_quadratic_midpoint_matches_control_point():
    # edge of the worked-example quad: nodes at t = 0, 0.5, 1
    c = ParamCurve([(-1.5, -2.0), (0.1, -0.1), (1.0, -1.0)])
    p = curve_eval(c, 0.5)
    assert p == Point2(0.1, -0.1)


def test_curve_endpoints_interpolate():
    q = ParamCurve([(0.3, 1.2), (2.0, -0.5), (4.0, 4.0)])
    assert curve_eval(q, 0.0) == Point2(0.3, 1.2)  # bit-exact at degree 2
    assert curve_eval(q, 1.0) == Point2(4.0, 4.0)
    c = ParamCurve([(0.3, 1.2), (2.0, -0.5), (1.0, 0.25), (4.0, 4.0)])
    assert curve_eval(c, 0.0).dist(Point2(0.3, 1.2)) <= 2e-15 * 4
    assert curve_eval(c, 1.0).dist(Point2(4.0, 4.0)) <= 2e-15 * 4


def test_linear_interpolation():
    c = ParamCurve([(0, 0), (2, 4)])
    assert curve_eval(c, 0.25) == Point2(0.5, 1.0)
    assert curve_deriv(c, 0.77) == (2.0, 4.0)


def test_node_reproduction_tolerance():
    rng = np.random.default_rng(7)
    for d in (1, 2, 3, 4):
        nodes = rng.uniform(-10, 10, (d + 1, 2))
        c = ParamCurve(nodes)
        ts = np.arange(d + 1) / d
        err = np.abs(c.eval(ts) - nodes).max()
        assert err <= 1e-14 * np.abs(nodes).max()


def test_quadratic_derivative_blend():
    nodes = np.array([(-1.5, -2.0), (0.1, -0.1), (1.0, -1.0)])
    c = ParamCurve(nodes)
    for t in (0.0, 0.3, 0.5, 0.9, 1.0):
        expected = ((4 * t - 3) * nodes[0] + (4 - 8 * t) * nodes[1]
                    + (4 * t - 1) * nodes[2])
        assert np.allclose(c.deriv(t), expected, atol=1e-14)


def test_derivative_finite_difference_oracle():
    rng = np.random.default_rng(3)
    h = 1e-6
    for d in (1, 2, 3):
        nodes = rng.uniform(-10, 10, (d + 1, 2))
        c = ParamCurve(nodes)
        for t in (0.1, 0.42, 0.87):
            fd = (c.eval(t + h) - c.eval(t - h)) / (2 * h)
            assert np.abs(c.deriv(t) - fd).max() <= 1e-8 * 10


def test_bbox_segment():
    c = ParamCurve([(0, 0), (1, 1)])
    assert curve_bbox(c) == Aabb(0, 0, 1, 1)


def test_bbox_parabola_control_hull():
    c = ParamCurve([(0, 0), (0.5, 1.0), (1, 0)])
    # Lagrange -> Bezier: middle control point (4*mid - p0 - p1)/2 = (0.5, 2)
    assert np.allclose(c.bezier_points[1], [0.5, 2.0])
    box = curve_bbox(c)
    assert (box.xmin, box.ymin, box.xmax, box.ymax) == (0.0, 0.0, 1.0, 2.0)


def test_bbox_contains_dense_samples():
    rng = np.random.default_rng(11)
    for d in (2, 3, 4):
        c = ParamCurve(rng.uniform(-3, 3, (d + 1, 2)))
        box = curve_bbox(c)
        pts = c.eval(np.linspace(0, 1, 1000))
        assert pts[:, 0].min() >= box.xmin and pts[:, 0].max() <= box.xmax
        assert pts[:, 1].min() >= box.ymin and pts[:, 1].max() <= box.ymax


def test_validate_curve_rejects_self_intersection():
    loop = ParamCurve([(0, 0), (2, 1), (-1, 1), (1, 0)])  # crossing cubic
    with pytest.raises(GeometryError):
        validate_curve(loop)
    validate_curve(ParamCurve([(0, 0), (0.5, 0.2), (1, 0)]))


def test_point_in_unit_square(unit_square):
    assert point_in_polygon(unit_square, Point2(0.5, 0.5)) == "inside"
    assert point_in_polygon(unit_square, Point2(2.0, 2.0)) == "outside"
    assert point_in_polygon(unit_square, Point2(1.0, 0.5)) == "boundary"
    assert point_in_polygon(unit_square, Point2(0.25, 1.0)) == "boundary"


def _winding_oracle(poly, x, y, per_span=512):
    pts = poly.boundary_points(per_span=per_span)
    dx = pts[:, 0] - x
    dy = pts[:, 1] - y
    ang = np.arctan2(dy, dx)
    turns = np.diff(np.concatenate([ang, ang[:1]]))
    turns = (turns + np.pi) % (2 * np.pi) - np.pi
    return abs(turns.sum()) > np.pi


def test_point_in_curved_quad_matches_winding_oracle(quad_pair):
    qp, _ = quad_pair
    assert (qp.locate(0.0, 0.0) == "inside") == _winding_oracle(qp, 0.0, 0.0)
    rng = np.random.default_rng(5)
    for _ in range(40):
        x, y = rng.uniform(-2, 2, 2)
        loc = qp.locate(x, y)
        if loc == "boundary":
            continue
        assert (loc == "inside") == _winding_oracle(qp, x, y), (x, y)


def test_point_in_convex_polygon_halfplane_property():
    # random convex straight polygons vs the half-plane test, 1e4 points
    rng = np.random.default_rng(23)
    ang = np.sort(rng.uniform(0, 2 * np.pi, 7))
    verts = np.column_stack([np.cos(ang), np.sin(ang)]) * rng.uniform(0.5, 1.5)
    poly = polygon_from_points(verts)
    pts = rng.uniform(-2, 2, (10_000, 2))
    inside_hp = np.ones(len(pts), dtype=bool)
    near_edge = np.zeros(len(pts), dtype=bool)
    for k in range(len(verts)):
        a, b = verts[k], verts[(k + 1) % len(verts)]
        cross = ((b[0] - a[0]) * (pts[:, 1] - a[1])
                 - (b[1] - a[1]) * (pts[:, 0] - a[0]))
        inside_hp &= cross > 0
        near_edge |= np.abs(cross) < 1e-9
    for p, want, skip in zip(pts, inside_hp, near_edge):
        if skip:
            continue
        got = poly.locate(float(p[0]), float(p[1]))
        if got == "boundary":
            continue
        assert (got == "inside") == bool(want)


def test_span_orientation_and_subdivision():
    c = ParamCurve([(0, 0), (0.5, 1.0), (1, 0)])
    fwd = CurveSpan(c, 0.0, 1.0)
    rev = fwd.flipped()
    assert rev.reversed
    assert np.allclose(fwd.start, rev.end)
    sub = fwd.sub(0.25, 0.75)
    assert np.allclose(sub.start, c.eval(0.25))
    assert np.allclose(sub.end, c.eval(0.75))
    # sub-span bbox still bounds dense samples
    box = sub.bbox()
    pts = c.eval(np.linspace(0.25, 0.75, 500))
    assert pts[:, 1].max() <= box.ymax + 1e-15


def test_polygon_validation_catches_clockwise(unit_square):
    cw = polygon_from_points([(0, 0), (0, 1), (1, 1), (1, 0)])
    with pytest.raises(GeometryError):
        cw.validate()
    unit_square.validate()


@settings(max_examples=60, deadline=None)
@given(st.floats(-0.2, 1.2), st.floats(-0.2, 1.2))
def test_square_locate_never_crashes(x, y):
    sq = polygon_from_points([(0, 0), (1, 0), (1, 1), (0, 1)])
    assert sq.locate(x, y) in ("inside", "outside", "boundary")


def test_signed_area_triangle():
    tri = polygon_from_points([(0, 0), (2, 0), (0, 2)])
    assert math.isclose(tri.signed_area(), 2.0, rel_tol=1e-14)


def test_interior_point_is_inside(quad_pair):
    for poly in quad_pair:
        x, y = poly.interior_point()
        assert poly.locate(x, y) == "inside"
