from fractions import Fraction

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from randtile import geometry
from randtile.errors import StructuralError
from randtile.geometry import (Box, Polygon, boundary_distance, frac,
                               pair_intersection_volume, union_volume)

H = Fraction(1, 2)


def test_frac_coercions():
    assert frac("3/4") == Fraction(3, 4)
    assert frac(2) == 2
    assert frac(0.25) == Fraction(1, 4)
    assert isinstance(frac(Fraction(1, 3)), Fraction)


def test_box_basics():
    b = Box((-H, -H), (H, H))
    assert b.volume() == 1
    assert b.centroid() == (0, 0)
    assert b.contains_point((0, 0), strict=True)
    assert b.contains_point((H, H)) and not b.contains_point((H, H), strict=True)
    with pytest.raises(StructuralError):
        Box((0, 0), (0, 1))


def test_box_intersection_volume():
    a = Box((0, 0), (1, 1))
    b = Box((H, H), (2, 2))
    assert a.intersection_volume(b) == Fraction(1, 4)
    assert b.intersection_volume(a) == Fraction(1, 4)
    c = Box((2, 2), (3, 3))
    assert a.intersection_volume(c) == 0


def test_polygon_orientation_and_area():
    # clockwise input is normalized to counterclockwise
    p = Polygon([(0, 0), (0, 1), (1, 1), (1, 0)])
    assert p.volume() == 1
    assert geometry._signed_area2(p.vertices) == 2
    assert p.convex
    assert p.centroid() == (H, H)


def test_polygon_degenerate_and_self_intersecting():
    with pytest.raises(StructuralError):
        Polygon([(0, 0), (1, 1), (2, 2)])
    with pytest.raises(StructuralError):
        Polygon([(0, 0), (1, 1), (1, 0), (0, 1)])


def test_polygon_contains_point():
    tri = Polygon([(0, 0), (2, 0), (0, 2)])
    assert tri.contains_point((1, Fraction(1, 2)))
    assert tri.contains_point((1, 1))            # on the hypotenuse
    assert not tri.contains_point((1, 1), strict=True)
    assert not tri.contains_point((2, 2))


def test_nonconvex_containment():
    # L-shaped region
    ell = Polygon([(0, 0), (2, 0), (2, 1), (1, 1), (1, 2), (0, 2)])
    assert not ell.convex
    assert ell.volume() == 3
    inner = Box((0, 0), (1, 1))
    assert ell.contains_shape(inner)
    assert not ell.contains_shape(Box((H, H), (Fraction(3, 2), Fraction(3, 2))))


def test_polygon_intersection_volume_triangles():
    a = Polygon([(0, 0), (2, 0), (0, 2)])
    b = Polygon([(2, 2), (0, 2), (2, 0)])
    assert a.intersection_volume(b) == 0
    sq = Polygon([(0, 0), (2, 0), (2, 2), (0, 2)])
    assert a.intersection_volume(sq) == 2


def test_union_volume():
    a = Box((0, 0), (1, 1))
    b = Box((H, 0), (Fraction(3, 2), 1))
    assert union_volume([a, b]) == Fraction(3, 2)
    assert pair_intersection_volume(a, b) == H


def test_transform_negative_theta():
    tri = Polygon([(0, 0), (2, 0), (0, 2)])
    img = tri.transform(Fraction(-1, 2), (1, 1))
    assert img.volume() == tri.volume() / 4
    assert geometry._signed_area2(img.vertices) > 0   # still CCW


def test_boundary_distance():
    b = Box((0, 0), (2, 2))
    assert boundary_distance(b, (1, 1)) == pytest.approx(1.0)
    # the embedding stretches the y-axis, moving the nearest wall
    assert boundary_distance(b, (1, 1), embedding=(1.0, 3.0)) == pytest.approx(1.0)
    assert boundary_distance(b, (1, Fraction(1, 4)),
                             embedding=(1.0, 3.0)) == pytest.approx(0.75)


boxes = st.tuples(st.integers(-5, 5), st.integers(-5, 5),
                  st.integers(1, 5), st.integers(1, 5))


@given(boxes, boxes)
@settings(max_examples=40, deadline=None)
def test_box_intersection_properties(p, q):
    a = Box((p[0], p[1]), (p[0] + p[2], p[1] + p[3]))
    b = Box((q[0], q[1]), (q[0] + q[2], q[1] + q[3]))
    v = a.intersection_volume(b)
    assert v == b.intersection_volume(a)
    assert 0 <= v <= min(a.volume(), b.volume())
    # agree with the polygon clipping path
    assert v == a.to_polygon().intersection_volume(b.to_polygon())
