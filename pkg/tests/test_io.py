import numpy as np
import pytest

from ppenet import io as pio
from ppenet.geom import PointPattern, Raster, SegmentPattern, Window, rasterize

UNIT = Window.rectangle(0, 0, 1, 1)


def test_points_roundtrip_with_marks(tmp_path):
    x = PointPattern([(0.1, 0.2), (0.3, 0.4)], UNIT, marks=["1", "2"])
    pio.write_points(tmp_path / "p.csv", x)
    y = pio.read_points(tmp_path / "p.csv", UNIT)
    assert np.array_equal(x.points, y.points)
    assert list(y.marks) == ["1", "2"]


def test_points_custom_mark_column(tmp_path):
    (tmp_path / "p.csv").write_text("x,y,priority\n0.1,0.1,1\n0.2,0.2,2\n0.3,0.3,1\n")
    x = pio.read_points(tmp_path / "p.csv", UNIT, mark_column="priority")
    assert x.select_mark("1").n == 2
    assert pio.read_points(tmp_path / "p.csv", UNIT).marks is None


def test_points_bad_input(tmp_path):
    (tmp_path / "a.csv").write_text("u,v\n1,2\n")
    with pytest.raises(pio.FormatError):
        pio.read_points(tmp_path / "a.csv", UNIT)
    (tmp_path / "b.csv").write_text("x,y\n0.5,abc\n")
    with pytest.raises(pio.FormatError):
        pio.read_points(tmp_path / "b.csv", UNIT)
    (tmp_path / "c.csv").write_text("")
    with pytest.raises(pio.FormatError):
        pio.read_points(tmp_path / "c.csv", UNIT)


def test_segments_and_window_roundtrip(tmp_path):
    L = SegmentPattern([(0, 0, 1, 1), (2, 2, 3, 2.5)])
    pio.write_segments(tmp_path / "s.csv", L)
    assert np.array_equal(pio.read_segments(tmp_path / "s.csv").segments, L.segments)
    w = Window([(0, 0), (2, 0), (2, 1), (1, 1), (1, 2), (0, 2)])
    pio.write_window(tmp_path / "w.csv", w)
    assert np.array_equal(pio.read_window(tmp_path / "w.csv").vertices, w.vertices)


def test_ascii_grid_layout_and_roundtrip(tmp_path):
    vals = np.array([[1.0, 2.0, np.nan], [4.0, 5.5, 6.25]])
    r = Raster((100.0, 200.0), 10.0, vals)
    text = pio.format_ascii_grid(r)
    lines = text.splitlines()
    assert lines[:6] == ["ncols 3", "nrows 2", "xllcorner 100.0", "yllcorner 200.0", "cellsize 10.0", "NODATA_value -9999"]
    assert lines[6].split() == ["4", "5.5", "6.25"]  # top row first
    assert lines[7].split() == ["1", "2", "-9999"]
    pio.write_ascii_grid(tmp_path / "r.asc", r)
    back = pio.read_ascii_grid(tmp_path / "r.asc")
    assert back.origin == r.origin and back.cell == r.cell
    assert np.array_equal(back.mask, r.mask)
    assert np.array_equal(back.values[r.mask], r.values[r.mask])


def test_ascii_grid_full_precision_roundtrip(tmp_path):
    rng = np.random.default_rng(3)
    r = rasterize(UNIT, 0.125).with_values(rng.random((8, 8)))
    pio.write_ascii_grid(tmp_path / "r.asc", r, fmt="%.17g")
    assert np.array_equal(pio.read_ascii_grid(tmp_path / "r.asc").values, r.values)


def test_ascii_grid_center_header(tmp_path):
    (tmp_path / "c.asc").write_text("ncols 2\nnrows 1\nxllcenter 0.5\nyllcenter 0.5\ncellsize 1\nnodata_value -1\n3 -1\n")
    r = pio.read_ascii_grid(tmp_path / "c.asc")
    assert r.origin == (0.0, 0.0)
    assert r.values[0, 0] == 3 and np.isnan(r.values[0, 1])


def test_ascii_grid_malformed(tmp_path):
    (tmp_path / "m.asc").write_text("ncols 2\nnrows 1\n1 2\n")
    with pytest.raises(pio.FormatError):
        pio.read_ascii_grid(tmp_path / "m.asc")


def test_zones(tmp_path):
    (tmp_path / "poly.csv").write_text("zone,x,y\nA,0,0\nA,1,0\nA,1,1\nB,1,0\nB,2,0\nB,2,1\nB,1,1\n")
    (tmp_path / "val.csv").write_text("zone,value\nA,5\nB,-2\n")
    zones = pio.read_zones(tmp_path / "poly.csv", tmp_path / "val.csv")
    assert [v for _, v in zones] == [5.0, -2.0]
    (tmp_path / "val2.csv").write_text("zone,value\nA,5\n")
    with pytest.raises(pio.FormatError):
        pio.read_zones(tmp_path / "poly.csv", tmp_path / "val2.csv")
