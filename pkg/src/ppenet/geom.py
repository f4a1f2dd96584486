"""Planar geometry: observation windows, point and segment patterns, rasters.

Coordinates are planar metres. A window is a single simple polygon; rasters
use square cells aligned to the window's bounding-box lower-left corner and
mark cells whose centre falls outside the window as nodata (NaN in memory).
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field

import numpy as np

__all__ = [
    "InvalidWindowError",
    "Window",
    "PointPattern",
    "SegmentPattern",
    "Raster",
    "contains",
    "area",
    "rasterize",
    "dist_point_segment",
    "point_segment_distances",
]

# relative tolerance for "on the boundary"
_BOUNDARY_RTOL = 1e-12


class InvalidWindowError(ValueError):
    pass


def _segments_intersect(p1, p2, q1, q2):
    """Vectorised proper/improper intersection test of segments p1p2 vs q1q2."""

    def orient(a, b, c):
        return (b[..., 0] - a[..., 0]) * (c[..., 1] - a[..., 1]) - (
            b[..., 1] - a[..., 1]
        ) * (c[..., 0] - a[..., 0])

    d1 = orient(q1, q2, p1)
    d2 = orient(q1, q2, p2)
    d3 = orient(p1, p2, q1)
    d4 = orient(p1, p2, q2)
    proper = ((d1 > 0) != (d2 > 0)) & ((d3 > 0) != (d4 > 0)) & (d1 != 0) & (
        d2 != 0
    ) & (d3 != 0) & (d4 != 0)

    def on_seg(a, b, c, d):
        return (
            (d == 0)
            & (np.minimum(a[..., 0], b[..., 0]) <= c[..., 0])
            & (c[..., 0] <= np.maximum(a[..., 0], b[..., 0]))
            & (np.minimum(a[..., 1], b[..., 1]) <= c[..., 1])
            & (c[..., 1] <= np.maximum(a[..., 1], b[..., 1]))
        )

    touching = (
        on_seg(q1, q2, p1, d1)
        | on_seg(q1, q2, p2, d2)
        | on_seg(p1, p2, q1, d3)
        | on_seg(p1, p2, q2, d4)
    )
    return proper | touching


@dataclass(frozen=True)
class Window:
    """Simple polygonal observation window.

    ``vertices`` is an (V, 2) array in either orientation; a repeated closing
    vertex is dropped.
    """

    vertices: np.ndarray

    def __post_init__(self):
        v = np.asarray(self.vertices, dtype=float)
        if v.ndim != 2 or v.shape[1] != 2:
            raise InvalidWindowError("window vertices must be an (V, 2) array")
        if len(v) > 1 and np.array_equal(v[0], v[-1]):
            v = v[:-1]
        if len(v) < 3:
            raise InvalidWindowError("window needs at least 3 vertices")
        if not np.all(np.isfinite(v)):
            raise InvalidWindowError("window vertices must be finite")
        v = v.copy()
        v.flags.writeable = False
        object.__setattr__(self, "vertices", v)
        if abs(_shoelace(v)) <= 0.0:
            raise InvalidWindowError("degenerate window (zero area)")
        if not _is_simple(v):
            raise InvalidWindowError("window polygon is self-intersecting")

    @classmethod
    def rectangle(cls, xmin, ymin, xmax, ymax):
        return cls(np.array([[xmin, ymin], [xmax, ymin], [xmax, ymax], [xmin, ymax]]))

    @property
    def bbox(self):
        """(xmin, ymin, xmax, ymax)."""
        v = self.vertices
        return (v[:, 0].min(), v[:, 1].min(), v[:, 0].max(), v[:, 1].max())

    @property
    def area(self):
        return abs(_shoelace(self.vertices))

    @property
    def diameter(self):
        """Bounding-box diagonal length."""
        xmin, ymin, xmax, ymax = self.bbox
        return math.hypot(xmax - xmin, ymax - ymin)

    @property
    def edges(self):
        """(V, 4) array of edges x1, y1, x2, y2."""
        v = self.vertices
        return np.hstack([v, np.roll(v, -1, axis=0)])

    def contains(self, points):
        return contains(self, points)

    def shifted(self, dx, dy):
        return Window(self.vertices + np.array([dx, dy]))

    def scaled(self, c):
        return Window(self.vertices * c)


def _shoelace(v):
    x, y = v[:, 0], v[:, 1]
    return 0.5 * float(np.dot(x, np.roll(y, -1)) - np.dot(np.roll(x, -1), y))


def _is_simple(v):
    n = len(v)
    a = v
    b = np.roll(v, -1, axis=0)
    for i in range(n):
        # skip the edge itself and its two neighbours (share a vertex)
        js = np.array([j for j in range(n) if j != i and j != (i + 1) % n and j != (i - 1) % n])
        if js.size == 0:
            continue
        hit = _segments_intersect(a[i][None, :], b[i][None, :], a[js], b[js])
        if np.any(hit):
            return False
    # adjacent edges folding back onto each other
    for i in range(n):
        p, q, r = v[i - 1], v[i], v[(i + 1) % n]
        cross = (q[0] - p[0]) * (r[1] - q[1]) - (q[1] - p[1]) * (r[0] - q[0])
        if cross == 0 and np.dot(q - p, r - q) < 0:
            return False
    return True


def contains(w, p):
    """Even-odd point-in-polygon test; points on the boundary count as inside.

    ``p`` may be a single (x, y) pair, in which case a bool is returned, or an
    (n, 2) array, giving a boolean array.
    """
    pts = np.asarray(p, dtype=float)
    single = pts.ndim == 1
    pts = np.atleast_2d(pts)
    px, py = pts[:, 0], pts[:, 1]
    inside = np.zeros(len(pts), dtype=bool)
    v = w.vertices
    xi, yi = v[:, 0], v[:, 1]
    xj, yj = np.roll(xi, 1), np.roll(yi, 1)
    for k in range(len(v)):
        crosses = (yi[k] > py) != (yj[k] > py)
        with np.errstate(divide="ignore", invalid="ignore"):
            xint = (xj[k] - xi[k]) * (py - yi[k]) / (yj[k] - yi[k]) + xi[k]
        inside ^= crosses & (px < xint)
    xmin, ymin, xmax, ymax = w.bbox
    tol = _BOUNDARY_RTOL * max(1.0, xmax - xmin, ymax - ymin, abs(xmin), abs(ymin), abs(xmax), abs(ymax))
    maybe = ~inside
    if np.any(maybe):
        d = point_segment_distances(pts[maybe], w.edges).min(axis=1)
        inside[np.flatnonzero(maybe)[d <= tol]] = True
    return bool(inside[0]) if single else inside


def area(w):
    """Shoelace area of the window polygon."""
    a = w.area
    if a <= 0:
        raise InvalidWindowError("degenerate window (zero area)")
    return a


def dist_point_segment(p, s):
    """Euclidean distance from point ``p`` to the closed segment ``s``.

    ``s`` is ``((x1, y1), (x2, y2))`` or the flat ``(x1, y1, x2, y2)``.
    """
    seg = np.asarray(s, dtype=float).reshape(1, 4)
    return float(point_segment_distances(np.asarray(p, dtype=float)[None, :], seg)[0, 0])


def point_segment_distances(points, segments):
    """(n, k) matrix of distances from each point to each segment.

    ``segments`` is an (k, 4) array of x1, y1, x2, y2. Zero-length segments
    degrade to point distances.
    """
    pts = np.asarray(points, dtype=float).reshape(-1, 2)
    seg = np.asarray(segments, dtype=float).reshape(-1, 4)
    ax, ay = seg[:, 0][None, :], seg[:, 1][None, :]
    dx, dy = (seg[:, 2] - seg[:, 0])[None, :], (seg[:, 3] - seg[:, 1])[None, :]
    px, py = pts[:, 0][:, None], pts[:, 1][:, None]
    len2 = dx * dx + dy * dy
    with np.errstate(divide="ignore", invalid="ignore"):
        t = ((px - ax) * dx + (py - ay) * dy) / len2
    t = np.where(len2 > 0, np.clip(t, 0.0, 1.0), 0.0)
    ex = px - (ax + t * dx)
    ey = py - (ay + t * dy)
    return np.hypot(ex, ey)


@dataclass(frozen=True)
class PointPattern:
    """Events ``points`` (n, 2) observed in ``window``, with optional marks."""

    points: np.ndarray
    window: Window
    marks: np.ndarray | None = None

    def __post_init__(self):
        pts = np.asarray(self.points, dtype=float).reshape(-1, 2)
        if not np.all(np.isfinite(pts)):
            raise ValueError("point coordinates must be finite")
        if len(pts) and not np.all(contains(self.window, pts)):
            bad = np.flatnonzero(~contains(self.window, pts))
            raise ValueError(f"{bad.size} point(s) lie outside the window, first at {pts[bad[0]].tolist()}")
        pts = pts.copy()
        pts.flags.writeable = False
        object.__setattr__(self, "points", pts)
        if self.marks is not None:
            marks = np.asarray(self.marks)
            if marks.shape != (len(pts),):
                raise ValueError("marks must have one entry per point")
            marks = marks.copy()
            marks.flags.writeable = False
            object.__setattr__(self, "marks", marks)

    @property
    def n(self):
        return len(self.points)

    def __len__(self):
        return len(self.points)

    def subset(self, index):
        index = np.asarray(index)
        marks = None if self.marks is None else self.marks[index]
        return PointPattern(self.points[index], self.window, marks)

    def select_mark(self, label):
        """Marginal sub-pattern with ``mark == label`` (compared as strings)."""
        if self.marks is None:
            raise ValueError("pattern has no marks")
        keep = np.array([str(m) == str(label) for m in self.marks], dtype=bool)
        return self.subset(np.flatnonzero(keep))

    def unmarked(self):
        return PointPattern(self.points, self.window)

    def shifted(self, dx, dy):
        return PointPattern(self.points + np.array([dx, dy]), self.window.shifted(dx, dy), self.marks)


@dataclass(frozen=True)
class SegmentPattern:
    """Line segments as an (k, 4) array x1, y1, x2, y2."""

    segments: np.ndarray

    def __post_init__(self):
        seg = np.asarray(self.segments, dtype=float).reshape(-1, 4)
        if not np.all(np.isfinite(seg)):
            raise ValueError("segment endpoints must be finite")
        if np.any(_lengths(seg) <= 0):
            raise ValueError("segments must have positive length")
        seg = seg.copy()
        seg.flags.writeable = False
        object.__setattr__(self, "segments", seg)

    @property
    def lengths(self):
        return _lengths(self.segments)

    def __len__(self):
        return len(self.segments)

    def shifted(self, dx, dy):
        return SegmentPattern(self.segments + np.array([dx, dy, dx, dy]))


def _lengths(seg):
    return np.hypot(seg[:, 2] - seg[:, 0], seg[:, 3] - seg[:, 1])


@dataclass(frozen=True)
class Raster:
    """Square-cell grid; ``values[i, j]`` is row ``i`` counted from the bottom.

    Nodata cells hold NaN in memory; ``nodata`` is the sentinel used on disk.
    """

    origin: tuple
    cell: float
    values: np.ndarray
    nodata: float = -9999.0
    meta: dict = field(default_factory=dict, compare=False)

    def __post_init__(self):
        vals = np.array(self.values, dtype=float)
        if vals.ndim != 2 or vals.size == 0:
            raise ValueError("raster values must be a non-empty 2-d array")
        if not self.cell > 0:
            raise ValueError("cell size must be positive")
        vals.flags.writeable = False
        object.__setattr__(self, "values", vals)
        object.__setattr__(self, "origin", (float(self.origin[0]), float(self.origin[1])))
        object.__setattr__(self, "cell", float(self.cell))

    @property
    def nrows(self):
        return self.values.shape[0]

    @property
    def ncols(self):
        return self.values.shape[1]

    @property
    def mask(self):
        """True where the cell carries data."""
        return np.isfinite(self.values)

    def centers_1d(self):
        """Cell-centre coordinates along x (ncols,) and y (nrows,)."""
        x0, y0 = self.origin
        xc = x0 + (np.arange(self.ncols) + 0.5) * self.cell
        yc = y0 + (np.arange(self.nrows) + 0.5) * self.cell
        return xc, yc

    def centers(self):
        """(nrows*ncols, 2) array of cell centres in row-major order."""
        xc, yc = self.centers_1d()
        gx, gy = np.meshgrid(xc, yc)
        return np.column_stack([gx.ravel(), gy.ravel()])

    def cell_index(self, points):
        """Row and column of the cell holding each point, clipped to the grid."""
        pts = np.asarray(points, dtype=float).reshape(-1, 2)
        x0, y0 = self.origin
        col = np.floor((pts[:, 0] - x0) / self.cell).astype(int)
        row = np.floor((pts[:, 1] - y0) / self.cell).astype(int)
        return np.clip(row, 0, self.nrows - 1), np.clip(col, 0, self.ncols - 1)

    def with_values(self, values, **meta):
        m = dict(self.meta)
        m.update(meta)
        return Raster(self.origin, self.cell, values, self.nodata, m)

    def integral(self):
        """Sum of defined cell values times cell area."""
        return float(np.nansum(self.values) * self.cell**2)

    def aligned_with(self, other):
        return (
            self.origin == other.origin
            and self.cell == other.cell
            and self.values.shape == other.values.shape
        )


def rasterize(w, cell):
    """Grid over the bbox of ``w``: 0.0 at in-window cell centres, NaN elsewhere."""
    if not cell > 0:
        raise ValueError("cell size must be positive")
    xmin, ymin, xmax, ymax = w.bbox
    width, height = xmax - xmin, ymax - ymin
    if cell > width or cell > height:
        warnings.warn("cell size exceeds a bounding-box side; raster is coarse", stacklevel=2)
    # guard against 1.0/0.1 = 10.000000000000002
    ncols = max(1, math.ceil(width / cell - 1e-9))
    nrows = max(1, math.ceil(height / cell - 1e-9))
    template = Raster((xmin, ymin), cell, np.zeros((nrows, ncols)))
    inside = contains(w, template.centers()).reshape(nrows, ncols)
    return template.with_values(np.where(inside, 0.0, np.nan))
