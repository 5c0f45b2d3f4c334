import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy.spatial.distance import directed_hausdorff as scipy_directed
from shapely.geometry import LineString, Point, Polygon

from squarelimits.errors import InvalidInputError
from squarelimits.geometry import (Location, PLTree, PolygonDisc, Polyline, Segment1D, distance_to_segments,
                                   distance_to_square_boundary, hausdorff_distance, min_set_distance,
                                   point_in_disc, sample_segments, segments_intersect, square_boundary_samples,
                                   validate_tree_embedding)

coord = st.floats(-1, 1, allow_nan=False)
points = st.lists(st.tuples(coord, coord), min_size=1, max_size=30).map(np.array)
# shapely misreports distances to segments of sub-normal length, so its oracle uses a lattice
lattice = st.integers(-1000, 1000).map(lambda k: k / 1000)


@settings(max_examples=60, deadline=None)
@given(points, points)
def test_hausdorff_matches_scipy(A, B):
    ref = max(scipy_directed(A, B)[0], scipy_directed(B, A)[0])
    assert hausdorff_distance(A, B) == pytest.approx(ref, abs=1e-12)
    assert hausdorff_distance(A, B) == pytest.approx(hausdorff_distance(B, A), abs=1e-15)


@settings(max_examples=60, deadline=None)
@given(points, points)
def test_min_set_distance_is_brute_force_minimum(A, B):
    brute = np.min(np.hypot(A[:, None, 0] - B[None, :, 0], A[:, None, 1] - B[None, :, 1]))
    assert min_set_distance(A, B) == pytest.approx(brute, abs=1e-12)


@settings(max_examples=60, deadline=None)
@given(points, st.lists(st.tuples(lattice, lattice, lattice, lattice), min_size=1, max_size=6))
def test_distance_to_segments_matches_shapely(P, raw):
    segs = np.array([[[a, b], [c, d]] for a, b, c, d in raw])
    got = distance_to_segments(P, segs)
    for p, g in zip(P, got):
        ref = min(Point(p).distance(LineString(s) if not np.array_equal(s[0], s[1]) else Point(s[0]))
                  for s in segs)
        assert g == pytest.approx(ref, abs=1e-12)


def test_segments_intersect_cases():
    assert segments_intersect([0, 0], [1, 1], [0, 1], [1, 0])
    assert not segments_intersect([0, 0], [1, 0], [0, 1], [1, 1])
    assert segments_intersect([0, 0], [1, 0], [1, 0], [2, 1])  # shared endpoint
    assert segments_intersect([0, 0], [2, 0], [1, 0], [3, 0])  # collinear overlap


polygons = st.sampled_from([
    [(-0.5, -0.5), (0.5, -0.5), (0.5, 0.5), (-0.5, 0.5)],
    [(0, 0), (0.8, 0.1), (0.3, 0.9), (0.1, 0.4), (-0.6, 0.5)],
    [(-0.9, -0.9), (0.9, -0.9), (0.0, 0.0), (0.9, 0.9), (-0.9, 0.9)],
])


@settings(max_examples=80, deadline=None)
@given(polygons, coord, coord)
def test_polygon_location_matches_shapely(V, x, y):
    D = PolygonDisc(np.array(V))
    poly = Polygon(V)
    loc = point_in_disc((x, y), D)
    d = poly.exterior.distance(Point(x, y))
    if d <= 1e-9:
        assert loc == Location.BOUNDARY
    else:
        assert (loc == Location.INSIDE) == poly.contains(Point(x, y))
    assert D.area == pytest.approx(poly.area)


def test_polygon_rejects_degenerate_and_self_intersecting():
    with pytest.raises(InvalidInputError):
        PolygonDisc(np.array([[0, 0], [1, 0], [2, 0]]))
    with pytest.raises(InvalidInputError):
        PolygonDisc(np.array([[0, 0], [1, 1], [1, 0], [0, 1]]))


def test_polyline_arc_must_be_simple():
    Polyline(np.array([[0, 0], [1, 0], [1, 1]]))
    with pytest.raises(InvalidInputError):
        Polyline(np.array([[0, 0], [1, 1], [1, 0], [0, 1]]))
    with pytest.raises(InvalidInputError):
        Polyline(np.array([[0, 0], [0, 0], [1, 0]]))


def test_tree_validation():
    star = PLTree(np.array([[0, 0], [0, 1], [1, 0], [-1, 0]]), ((0, 1), (0, 2), (0, 3)))
    assert validate_tree_embedding(star).valid
    assert list(star.degree()) == [3, 1, 1, 1]
    cycle = PLTree(np.array([[0, 0], [1, 0], [0, 1]]), ((0, 1), (1, 2), (2, 0)))
    assert not validate_tree_embedding(cycle).acyclic
    split = PLTree(np.array([[0, 0], [1, 0], [0, 1], [1, 1]]), ((0, 1), (2, 3)))
    assert not validate_tree_embedding(split).connected
    crossing = PLTree(np.array([[0, 0], [1, 1], [0, 1], [1, 0], [2, 2]]), ((0, 1), (1, 4), (2, 3), (3, 4)))
    assert validate_tree_embedding(crossing).crossings
    overlap = PLTree(np.array([[0, 0], [1, 0], [2, 0]]), ((0, 1), (0, 2)))
    assert validate_tree_embedding(overlap).crossings


@settings(max_examples=40, deadline=None)
@given(st.floats(1e-3, 0.5))
def test_sample_segments_spacing(spacing):
    segs = np.array([[[0, 0], [1, 0]], [[1, 0], [1, 0.7]]])
    P = sample_segments(segs, spacing)
    assert np.max(distance_to_segments(P, segs)) < 1e-12
    # every point of the segments is within half a spacing of a sample
    dense = sample_segments(segs, spacing / 20)
    assert hausdorff_distance(dense, P) <= spacing / 2 + 1e-12


def test_square_boundary_samples():
    B = square_boundary_samples(1000)
    assert len(B) == 1000
    assert np.all(np.max(np.abs(B), axis=1) == 1.0)
    assert np.all(distance_to_square_boundary(B) == 0.0)
    assert {(-1.0, -1.0), (1.0, 1.0)} <= set(map(tuple, B))


def test_segment1d():
    s = Segment1D(-0.2, 0.4)
    assert s.length == pytest.approx(0.6) and s.mid == pytest.approx(0.1)
    assert s.contains(0.4) and not s.contains(0.41)
    assert Segment1D(0.3, 0.3).is_point
    with pytest.raises(InvalidInputError):
        Segment1D(0.5, 0.1)
