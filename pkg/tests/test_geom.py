import math
import warnings

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from oracles import point_segment_distance_loop, point_segment_distance_sampled
from ppenet.geom import (
    InvalidWindowError,
    PointPattern,
    Raster,
    SegmentPattern,
    Window,
    area,
    contains,
    dist_point_segment,
    point_segment_distances,
    rasterize,
)

UNIT = Window.rectangle(0, 0, 1, 1)
L_SHAPE = Window([(0, 0), (2, 0), (2, 1), (1, 1), (1, 2), (0, 2)])


def test_contains_interior_exterior_boundary():
    assert contains(UNIT, (0.5, 0.5))
    assert not contains(UNIT, (2, 2))
    assert contains(UNIT, (0, 0.5))
    assert contains(UNIT, (1, 1))
    assert not contains(L_SHAPE, (1.5, 1.5))
    assert contains(L_SHAPE, (0.5, 1.5))


def test_contains_vectorised_matches_scalar():
    rng = np.random.default_rng(0)
    pts = rng.uniform(-0.5, 2.5, (200, 2))
    vec = contains(L_SHAPE, pts)
    assert vec.dtype == bool
    assert [contains(L_SHAPE, p) for p in pts] == list(vec)


def test_area_examples():
    assert area(UNIT) == 1.0
    assert area(Window.rectangle(0, 0, 2, 3)) == 6.0
    assert area(Window([(0, 0), (1, 0), (0, 1)])) == 0.5
    assert area(L_SHAPE) == 3.0


@pytest.mark.parametrize(
    "verts",
    [
        [(0, 0), (1, 0), (2, 0)],  # collinear: zero area
        [(0, 0), (1, 1), (1, 0), (0, 1)],  # bow tie
        [(0, 0), (1, 0)],
        [(0, 0), (1, 0), (np.nan, 1)],
    ],
)
def test_invalid_windows(verts):
    with pytest.raises(InvalidWindowError):
        Window(verts)


def test_closing_vertex_dropped():
    w = Window([(0, 0), (1, 0), (1, 1), (0, 1), (0, 0)])
    assert len(w.vertices) == 4
    assert w.area == 1.0


def test_rasterize_examples():
    r = rasterize(UNIT, 0.5)
    assert (r.nrows, r.ncols) == (2, 2)
    assert r.mask.all()
    r = rasterize(UNIT, 0.1)
    assert (r.nrows, r.ncols) == (10, 10)
    assert r.mask.sum() == 100
    r = rasterize(L_SHAPE, 0.25)
    assert not r.mask[6, 6]  # cell centred at (1.625, 1.625) is in the notch
    assert np.all(r.values[r.mask] == 0.0)


def test_rasterize_coarse_cell_warns():
    with pytest.warns(UserWarning):
        r = rasterize(UNIT, 5.0)
    assert (r.nrows, r.ncols) == (1, 1)


@pytest.mark.parametrize(
    "verts",
    [
        [(0, 0), (3, 0), (3, 2), (0, 2)],
        [(0, 0), (4, 1), (2, 3)],
        [(math.cos(t), math.sin(t)) for t in np.linspace(0, 2 * math.pi, 13)[:-1]],
    ],
)
def test_rasterized_area_converges(verts):
    w = Window(verts)
    r = rasterize(w, w.diameter / 256)
    assert abs(r.mask.sum() * r.cell**2 - w.area) / w.area < 0.01


def test_distance_examples():
    s = (-1, 0, 1, 0)
    assert dist_point_segment((0, 1), s) == 1.0
    assert dist_point_segment((2, 0), s) == 1.0
    tiny = (0, 0, 0, 0.0001)
    assert dist_point_segment((3, 4), tiny) == pytest.approx(point_segment_distance_sampled((3, 4), tiny), abs=1e-9)
    assert dist_point_segment((3, 4), tiny) == pytest.approx(5.0, abs=1e-4)


coord = st.floats(-100, 100, allow_nan=False)


@settings(max_examples=200, deadline=None)
@given(coord, coord, coord, coord, coord, coord)
def test_distance_matches_scalar_oracle(px, py, x1, y1, x2, y2):
    if math.hypot(x2 - x1, y2 - y1) < 1e-6:
        return
    seg = (x1, y1, x2, y2)
    assert dist_point_segment((px, py), seg) == pytest.approx(point_segment_distance_loop((px, py), seg), abs=1e-9)


@settings(max_examples=100, deadline=None)
@given(coord, coord, coord, coord, st.floats(0, 1))
def test_distance_zero_on_segment(x1, y1, x2, y2, t):
    if math.hypot(x2 - x1, y2 - y1) < 1e-6:
        return
    p = (x1 + t * (x2 - x1), y1 + t * (y2 - y1))
    assert dist_point_segment(p, (x1, y1, x2, y2)) < 1e-12 * max(1.0, abs(x1), abs(x2), abs(y1), abs(y2)) * 10


def test_distance_positive_off_segment():
    assert dist_point_segment((0, 1e-6), (-1, 0, 1, 0)) > 0


def test_distance_matrix_shape():
    pts = np.array([[0, 1], [2, 0], [0, -3]])
    segs = np.array([[-1, 0, 1, 0], [0, 5, 0, 6]])
    d = point_segment_distances(pts, segs)
    assert d.shape == (3, 2)
    assert d[:, 0].tolist() == [1.0, 1.0, 3.0]
    assert d[:, 1].tolist() == [4.0, pytest.approx(math.hypot(2, 5)), 8.0]


@settings(max_examples=60, deadline=None)
@given(st.lists(st.tuples(st.floats(-3, 3), st.floats(-3, 3)), min_size=20, max_size=20))
def test_contains_invariant_to_vertex_order(points):
    rev = Window(L_SHAPE.vertices[::-1])
    pts = np.array(points)
    assert np.array_equal(contains(L_SHAPE, pts), contains(rev, pts))


def test_point_pattern_validation_and_marks():
    x = PointPattern([(0.2, 0.2), (0.5, 0.9)], UNIT, marks=["1", "2"])
    assert x.n == 2
    assert x.select_mark(1).n == 1
    assert x.unmarked().marks is None
    with pytest.raises(ValueError):
        PointPattern([(1.5, 0.5)], UNIT)
    with pytest.raises(ValueError):
        PointPattern([(0.5, 0.5)], UNIT, marks=["a", "b"])
    assert PointPattern(np.empty((0, 2)), UNIT).n == 0


def test_point_pattern_is_immutable():
    x = PointPattern([(0.2, 0.2)], UNIT)
    with pytest.raises(ValueError):
        x.points[0, 0] = 0.3


def test_segment_pattern_rejects_zero_length():
    with pytest.raises(ValueError):
        SegmentPattern([(0, 0, 0, 0)])
    L = SegmentPattern([(0, 0, 3, 4)])
    assert L.lengths.tolist() == [5.0]


def test_raster_cell_index_and_centres():
    r = Raster((10.0, 20.0), 2.0, np.arange(6.0).reshape(2, 3))
    assert r.centers()[:3].tolist() == [[11, 21], [13, 21], [15, 21]]
    row, col = r.cell_index([(11, 21), (15.5, 23.9), (100, -100)])
    assert row.tolist() == [0, 1, 0]
    assert col.tolist() == [0, 2, 2]
    assert r.integral() == pytest.approx(15 * 4)


def test_shift_and_scale_windows():
    w = L_SHAPE.shifted(1e6, 7e6)
    assert w.area == pytest.approx(3.0)
    assert L_SHAPE.scaled(2).area == pytest.approx(12.0)
    with warnings.catch_warnings():
        warnings.simplefilter("error")
        assert contains(w, (1e6 + 0.5, 7e6 + 1.5))
