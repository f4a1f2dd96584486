"""Readers and writers for the on-disk formats.

* points: CSV ``x,y[,mark]``
* segments: CSV ``x1,y1,x2,y2``
* window: CSV vertex list ``x,y``
* rasters: ESRI ASCII grid, rows written top to bottom
* zones: polygon CSV ``zone,x,y`` plus value CSV ``zone,value``
"""

from __future__ import annotations

import csv
import io as _io
from pathlib import Path

import numpy as np

from .geom import PointPattern, Raster, SegmentPattern, Window

__all__ = [
    "read_points",
    "write_points",
    "read_segments",
    "write_segments",
    "read_window",
    "write_window",
    "read_ascii_grid",
    "write_ascii_grid",
    "format_ascii_grid",
    "read_zones",
]


class FormatError(ValueError):
    pass


def _rows(path, required):
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.DictReader(fh)
        if reader.fieldnames is None:
            raise FormatError(f"{path}: empty file")
        header = [h.strip() for h in reader.fieldnames]
        missing = [c for c in required if c not in header]
        if missing:
            raise FormatError(f"{path}: missing column(s) {missing}")
        reader.fieldnames = header
        return header, list(reader)


def _floats(rows, col, path):
    try:
        return np.array([float(r[col]) for r in rows], dtype=float)
    except (TypeError, ValueError) as exc:
        raise FormatError(f"{path}: non-numeric value in column {col!r}") from exc


def read_points(path, window, mark_column="mark"):
    """Point pattern from CSV; marks come from ``mark_column`` when present."""
    header, rows = _rows(path, ["x", "y"])
    pts = np.column_stack([_floats(rows, "x", path), _floats(rows, "y", path)]) if rows else np.empty((0, 2))
    marks = None
    if mark_column in header:
        marks = np.array([r[mark_column].strip() for r in rows], dtype=object)
    return PointPattern(pts, window, marks)


def write_points(path, pattern):
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        if pattern.marks is None:
            w.writerow(["x", "y"])
            for x, y in pattern.points:
                w.writerow([repr(float(x)), repr(float(y))])
        else:
            w.writerow(["x", "y", "mark"])
            for (x, y), m in zip(pattern.points, pattern.marks):
                w.writerow([repr(float(x)), repr(float(y)), m])


def read_segments(path):
    _, rows = _rows(path, ["x1", "y1", "x2", "y2"])
    cols = [_floats(rows, c, path) for c in ("x1", "y1", "x2", "y2")]
    return SegmentPattern(np.column_stack(cols) if rows else np.empty((0, 4)))


def write_segments(path, segs):
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["x1", "y1", "x2", "y2"])
        for row in segs.segments:
            w.writerow([repr(float(v)) for v in row])


def read_window(path):
    _, rows = _rows(path, ["x", "y"])
    return Window(np.column_stack([_floats(rows, "x", path), _floats(rows, "y", path)]))


def write_window(path, window):
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["x", "y"])
        for x, y in window.vertices:
            w.writerow([repr(float(x)), repr(float(y))])


def read_zones(polygon_path, value_path):
    """Return a list of (Window, value) pairs keyed by the ``zone`` column."""
    _, prow = _rows(polygon_path, ["zone", "x", "y"])
    _, vrow = _rows(value_path, ["zone", "value"])
    values = {r["zone"].strip(): float(r["value"]) for r in vrow}
    verts = {}
    for r in prow:
        verts.setdefault(r["zone"].strip(), []).append((float(r["x"]), float(r["y"])))
    missing = sorted(set(verts) - set(values))
    if missing:
        raise FormatError(f"{value_path}: no value for zone(s) {missing}")
    return [(Window(np.array(v)), values[z]) for z, v in verts.items()]


def format_ascii_grid(raster, fmt="%.10g"):
    buf = _io.StringIO()
    buf.write(f"ncols {raster.ncols}\n")
    buf.write(f"nrows {raster.nrows}\n")
    buf.write(f"xllcorner {raster.origin[0]!r}\n")
    buf.write(f"yllcorner {raster.origin[1]!r}\n")
    buf.write(f"cellsize {raster.cell!r}\n")
    buf.write(f"NODATA_value {raster.nodata:g}\n")
    vals = np.where(np.isfinite(raster.values), raster.values, raster.nodata)
    np.savetxt(buf, vals[::-1], fmt=fmt, delimiter=" ")
    return buf.getvalue()


def write_ascii_grid(path, raster, fmt="%.10g"):
    Path(path).write_text(format_ascii_grid(raster, fmt), encoding="utf-8")


def read_ascii_grid(path):
    header = {}
    with open(path, encoding="utf-8") as fh:
        lines = fh.read().splitlines()
    i = 0
    while i < len(lines):
        parts = lines[i].split()
        if len(parts) == 2 and parts[0][0].isalpha():
            header[parts[0].lower()] = parts[1]
            i += 1
        else:
            break
    try:
        ncols, nrows = int(header["ncols"]), int(header["nrows"])
        cell = float(header["cellsize"])
        if "xllcorner" in header:
            x0, y0 = float(header["xllcorner"]), float(header["yllcorner"])
        else:
            x0 = float(header["xllcenter"]) - cell / 2
            y0 = float(header["yllcenter"]) - cell / 2
    except KeyError as exc:
        raise FormatError(f"{path}: missing header field {exc}") from None
    nodata = float(header.get("nodata_value", -9999.0))
    data = np.array(" ".join(lines[i:]).split(), dtype=float)
    if data.size != nrows * ncols:
        raise FormatError(f"{path}: expected {nrows * ncols} values, found {data.size}")
    vals = data.reshape(nrows, ncols)[::-1]
    vals = np.where(vals == nodata, np.nan, vals)
    return Raster((x0, y0), cell, vals, nodata)
