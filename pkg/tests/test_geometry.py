import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from geocon.geometry import (
    AXIS_CUBE,
    AXIS_SQUARE,
    CIRCLE,
    KINDS,
    ORIENTED_CUBE,
    ORIENTED_SQUARE,
    SPHERE,
    GeometryError,
    PointSet,
    Shape,
    boundary_samples,
    contains,
    contains_many,
    covered_indices,
    distance,
    enclosing_rect,
    shape_diameter,
    shapes_overlap,
)

coord = st.floats(-50, 50, allow_nan=False)
size = st.floats(0.1, 5)


@st.composite
def shapes(draw, kinds=KINDS):
    kind = draw(st.sampled_from(kinds))
    dim = 3 if kind in (AXIS_CUBE, ORIENTED_CUBE, SPHERE) else 2
    anchor = tuple(draw(coord) for _ in range(dim))
    rot = 0.0
    if kind == ORIENTED_SQUARE:
        rot = draw(st.floats(0, math.pi / 2, exclude_max=True))
    elif kind == ORIENTED_CUBE:
        q = [draw(st.floats(-1, 1)) for _ in range(4)]
        rot = tuple(q) if np.linalg.norm(q) > 0.1 else (1.0, 0.0, 0.0, 0.0)
    return Shape(kind, draw(size), anchor, rot)


def test_distance_examples():
    assert distance((0, 0), (3, 4)) == 5
    assert distance((1, 2), (1, 2)) == 0
    assert distance((0, 0, 0), (1, 1, 1)) == pytest.approx(math.sqrt(3), abs=1e-12)
    with pytest.raises(GeometryError):
        distance((0, 0), (0, 0, 0))


def test_diameter_examples():
    assert shape_diameter(Shape(AXIS_SQUARE, 2, (0, 0))) == pytest.approx(2 * math.sqrt(2))
    assert shape_diameter(Shape(CIRCLE, 2, (0, 0))) == 2
    assert shape_diameter(Shape(AXIS_CUBE, 1, (0, 0, 0))) == pytest.approx(math.sqrt(3))


def test_contains_examples():
    sq = Shape(AXIS_SQUARE, 2, (0, 0))
    assert contains(sq, (2, 2))
    assert not contains(sq, (2 + 1e-6, 1))
    assert contains(Shape(CIRCLE, 2, (0, 0)), (1, 0))
    with pytest.raises(GeometryError):
        contains(sq, (1, 1, 1))


def test_covered_indices_examples():
    assert covered_indices(Shape(AXIS_SQUARE, 1, (0, 0)), PointSet([(0.5, 0.5), (2, 2)])) == [0]
    assert covered_indices(Shape(AXIS_SQUARE, 1, (10, 10)), PointSet([(0.5, 0.5), (2, 2)])) == []
    assert covered_indices(Shape(CIRCLE, 2, (0, 0)), PointSet([(1, 0), (0, 1), (1, 1)])) == [0, 1]


def test_overlap_examples():
    assert shapes_overlap(Shape(AXIS_SQUARE, 1, (0, 0)), Shape(AXIS_SQUARE, 1, (1, 0)))
    assert not shapes_overlap(Shape(CIRCLE, 2, (0, 0)), Shape(CIRCLE, 2, (3, 0)))
    assert shapes_overlap(Shape(ORIENTED_SQUARE, 1, (0.9, 0.9), math.pi / 4), Shape(AXIS_SQUARE, 1, (0, 0)))


def test_oriented_overlap_separated_by_rotated_axis():
    # the rotated square's corner points away from the axis square
    rot = Shape(ORIENTED_SQUARE, 1, (1.6, 0.5), math.pi / 4)
    assert not shapes_overlap(rot, Shape(AXIS_SQUARE, 1, (0, 0)))


def test_enclosing_rect_examples():
    r = enclosing_rect(PointSet([(1, 1), (3, 5), (2, 2)]))
    assert (r.lo, r.hi) == ((1, 1), (3, 5))
    r = enclosing_rect(PointSet([(4, 4)]))
    assert r.lo == r.hi
    r = enclosing_rect(PointSet([(0, 0, 0), (2, 1, 3)]))
    assert (r.lo, r.hi) == ((0, 0, 0), (2, 1, 3))


def test_pointset_validation():
    with pytest.raises(GeometryError):
        PointSet([])
    with pytest.raises(GeometryError):
        PointSet([(0, 0), (0, 0)])
    with pytest.raises(GeometryError):
        PointSet([(0, 0), (1, 1, 1)])


def test_shape_validation():
    with pytest.raises(GeometryError):
        Shape(AXIS_SQUARE, 0, (0, 0))
    with pytest.raises(GeometryError):
        Shape(AXIS_SQUARE, 1, (0, 0, 0))
    with pytest.raises(GeometryError):
        Shape("hexagon", 1, (0, 0))
    assert Shape(ORIENTED_SQUARE, 1, (0, 0), math.pi / 2 + 0.1).rotation == pytest.approx(0.1)


def test_shape_round_trip():
    for s in (Shape(ORIENTED_SQUARE, 1.5, (1, 2), 0.3), Shape(ORIENTED_CUBE, 2, (0, 1, 2), (1, 1, 0, 0)), Shape(SPHERE, 1, (0, 0, 0))):
        assert Shape.from_dict(s.to_dict()) == s


@given(shapes())
def test_contains_is_closed(s):
    pts = boundary_samples(s, 64)
    assert contains_many(s, pts).all()


@given(shapes())
def test_overlap_reflexive(s):
    assert shapes_overlap(s, s)


@given(st.data())
def test_overlap_symmetric(data):
    a = data.draw(shapes())
    same_dim = [k for k in KINDS if (k in (AXIS_CUBE, ORIENTED_CUBE, SPHERE)) == (a.dim == 3)]
    b = data.draw(shapes(same_dim))
    assert shapes_overlap(a, b) == shapes_overlap(b, a)


@given(st.data())
def test_overlap_agrees_with_sampled_witness(data):
    a = data.draw(shapes())
    same_dim = [k for k in KINDS if (k in (AXIS_CUBE, ORIENTED_CUBE, SPHERE)) == (a.dim == 3)]
    b = data.draw(shapes(same_dim))
    # any boundary point of one inside the other proves overlap
    if contains_many(b, boundary_samples(a, 200)).any() or contains_many(a, boundary_samples(b, 200)).any():
        assert shapes_overlap(a, b)


@given(shapes())
def test_diameter_matches_boundary_spread(s):
    pts = boundary_samples(s, 400, np.random.default_rng(1))
    spread = max(np.linalg.norm(pts[:, None] - pts[None], axis=-1).max(), 0.0)
    d = shape_diameter(s)
    assert spread <= d + 1e-9
    if s.is_box:
        assert spread == pytest.approx(d, abs=1e-9)  # opposite vertices are sampled


@given(st.lists(st.tuples(coord, coord), min_size=1, max_size=30, unique=True))
def test_enclosing_rect_is_tight(pts):
    ps = PointSet(pts)
    r = enclosing_rect(ps)
    assert all(r.contains(p) for p in ps)
    arr = ps.array
    for a in range(2):
        assert arr[:, a].min() == r.lo[a] and arr[:, a].max() == r.hi[a]
