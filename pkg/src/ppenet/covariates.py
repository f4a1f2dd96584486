"""Covariate stacks: spatial fields evaluated at arbitrary locations.

A stack holds base covariate sources (rasters, coordinates, zones, distance
fields, plain functions), optional pairwise product columns named
``"a:b"``, and an optional weighted standardisation learned from a
quadrature scheme.
"""

from __future__ import annotations

import json
import warnings
from dataclasses import dataclass, field, replace
from itertools import combinations
from pathlib import Path

import numpy as np

from . import io as pio
from .bandwidth import default_segment_bandwidth, segment_length_bandwidth, select_bandwidth
from .geom import contains
from .smoothing import (
    KernelSpec,
    distance_raster,
    kernel_intensity,
    nearest_distance,
    pixel_count_density,
    segment_density,
)

__all__ = [
    "RasterCovariate",
    "CoordinateCovariate",
    "ZoneCovariate",
    "DistanceCovariate",
    "FunctionCovariate",
    "CovariateStack",
    "NodataError",
    "eval_at",
    "expand_interactions",
    "standardize",
    "benchmark_covariate",
    "build_from_manifest",
    "MANIFEST_KINDS",
]

FILL_RADIUS = 3


class NodataError(ValueError):
    pass


@dataclass(frozen=True)
class RasterCovariate:
    raster: object

    def eval(self, points, fill=True):
        r = self.raster
        row, col = r.cell_index(points)
        vals = r.values[row, col].copy()
        if fill:
            missing = np.flatnonzero(~np.isfinite(vals))
            for i in missing:
                vals[i] = _nearest_defined(r, row[i], col[i])
        return vals

    def to_raster(self, grid):
        if self.raster.aligned_with(grid):
            return grid.with_values(np.where(grid.mask, self.raster.values, np.nan))
        return grid.with_values(np.where(grid.mask, self.eval(grid.centers(), fill=False).reshape(grid.values.shape), np.nan))


def _nearest_defined(r, i, j):
    lo_i, hi_i = max(0, i - FILL_RADIUS), min(r.nrows, i + FILL_RADIUS + 1)
    lo_j, hi_j = max(0, j - FILL_RADIUS), min(r.ncols, j + FILL_RADIUS + 1)
    block = r.values[lo_i:hi_i, lo_j:hi_j]
    ok = np.isfinite(block)
    if not ok.any():
        return np.nan
    ii, jj = np.nonzero(ok)
    d2 = (ii + lo_i - i) ** 2 + (jj + lo_j - j) ** 2
    k = np.lexsort((jj, ii, d2))[0]  # nearest, ties broken by position
    return block[ii[k], jj[k]]


@dataclass(frozen=True)
class CoordinateCovariate:
    axis: str  # "x" or "y"

    def eval(self, points, fill=True):
        pts = np.asarray(points, dtype=float).reshape(-1, 2)
        return pts[:, 0 if self.axis == "x" else 1].copy()

    def to_raster(self, grid):
        return grid.with_values(np.where(grid.mask, self.eval(grid.centers()).reshape(grid.values.shape), np.nan))


@dataclass(frozen=True)
class ZoneCovariate:
    """Piecewise-constant field: value of the first zone polygon containing the point."""

    zones: tuple  # ((Window, value), ...)

    def eval(self, points, fill=True):
        pts = np.asarray(points, dtype=float).reshape(-1, 2)
        out = np.full(len(pts), np.nan)
        todo = np.ones(len(pts), dtype=bool)
        for poly, value in self.zones:
            if not todo.any():
                break
            idx = np.flatnonzero(todo)
            hit = contains(poly, pts[idx])
            out[idx[hit]] = value
            todo[idx[hit]] = False
        return out

    def to_raster(self, grid):
        return grid.with_values(np.where(grid.mask, self.eval(grid.centers()).reshape(grid.values.shape), np.nan))


@dataclass(frozen=True)
class DistanceCovariate:
    """Exact distance to a point or segment pattern."""

    target: object

    def eval(self, points, fill=True):
        return nearest_distance(points, self.target)

    def to_raster(self, grid):
        return distance_raster(self.target, grid)


@dataclass(frozen=True)
class FunctionCovariate:
    """Any vectorised ``f(x, y) -> values``."""

    func: object

    def eval(self, points, fill=True):
        pts = np.asarray(points, dtype=float).reshape(-1, 2)
        return np.asarray(self.func(pts[:, 0], pts[:, 1]), dtype=float) * np.ones(len(pts))

    def to_raster(self, grid):
        return grid.with_values(np.where(grid.mask, self.eval(grid.centers()).reshape(grid.values.shape), np.nan))


@dataclass(frozen=True)
class CovariateStack:
    names: tuple
    sources: tuple
    interactions: tuple = ()  # ((i, j), ...) over base columns, i <= j
    center: np.ndarray | None = None
    scale: np.ndarray | None = None
    keep: np.ndarray | None = None  # raw column indices kept after standardisation
    meta: dict = field(default_factory=dict, compare=False)

    def __post_init__(self):
        names = tuple(str(n) for n in self.names)
        if len(names) < 1:
            raise ValueError("a covariate stack needs at least one covariate")
        if len(names) != len(self.sources):
            raise ValueError("one source per covariate name")
        object.__setattr__(self, "names", names)
        object.__setattr__(self, "sources", tuple(self.sources))
        object.__setattr__(self, "interactions", tuple((int(i), int(j)) for i, j in self.interactions))
        if len(set(self.raw_names)) != len(self.raw_names):
            raise ValueError("covariate names must be unique")

    @property
    def K(self):
        return len(self.names)

    @property
    def raw_names(self):
        return list(self.names) + [f"{self.names[i]}:{self.names[j]}" for i, j in self.interactions]

    @property
    def column_names(self):
        raw = self.raw_names
        return raw if self.keep is None else [raw[k] for k in self.keep]

    @property
    def n_raw(self):
        return len(self.names) + len(self.interactions)

    @property
    def standardized(self):
        return self.center is not None

    def raw(self):
        return replace(self, center=None, scale=None, keep=None)

    def eval_raw(self, points, fill=True):
        pts = np.asarray(points, dtype=float).reshape(-1, 2)
        base = np.column_stack([s.eval(pts, fill) for s in self.sources]) if self.sources else np.empty((len(pts), 0))
        if not self.interactions:
            return base
        prods = np.column_stack([base[:, i] * base[:, j] for i, j in self.interactions])
        return np.hstack([base, prods])


def eval_at(stack, points, fill=True):
    """Design matrix (m x columns) of ``stack`` at ``points``.

    With ``fill`` a raster nodata cell takes the nearest defined cell within
    3 cells; anything still undefined raises NodataError. Without ``fill``
    undefined entries are returned as NaN.
    """
    Z = stack.eval_raw(points, fill)
    if fill and not np.all(np.isfinite(Z)):
        rows, cols = np.nonzero(~np.isfinite(Z))
        names = stack.raw_names
        raise NodataError(
            f"covariate {names[cols[0]]!r} undefined at {np.asarray(points).reshape(-1, 2)[rows[0]].tolist()} "
            f"({rows.size} entries) with no defined cell within {FILL_RADIUS} cells"
        )
    if stack.standardized:
        Z = (Z[:, stack.keep] - stack.center) / stack.scale
    return Z


def expand_interactions(stack, include_squares=False):
    """Append products z_i z_j for i < j, plus z_i^2 when ``include_squares``."""
    K = stack.K
    if K < 2:
        raise ValueError("interactions need at least two covariates")
    pairs = list(combinations(range(K), 2))
    if include_squares:
        pairs += [(i, i) for i in range(K)]
    return CovariateStack(stack.names, stack.sources, tuple(pairs), meta=dict(stack.meta))


def weighted_moments(Z, w):
    p = np.asarray(w, dtype=float) / np.sum(w)
    mean = p @ Z
    sd = np.sqrt(p @ (Z - mean) ** 2)
    return mean, sd


def standardize(stack, q, Z_raw=None):
    """Centre and scale each column by its quadrature-weighted mean and sd.

    Constant columns are dropped with a warning.
    """
    base = stack.raw()
    if Z_raw is None:
        Z_raw = eval_at(base, q.points)
    mean, sd = weighted_moments(Z_raw, q.weights)
    const = sd <= 1e-12 * np.maximum(1.0, np.abs(mean))
    if const.all():
        raise ValueError("every covariate is constant over the window")
    if const.any():
        dropped = [base.raw_names[k] for k in np.flatnonzero(const)]
        warnings.warn(f"dropping constant covariate(s): {dropped}", stacklevel=2)
    keep = np.flatnonzero(~const)
    return replace(base, center=mean[keep], scale=sd[keep], keep=keep)


def benchmark_covariate(x, w, grid, seed=0, K_max=30):
    """Edge-corrected kernel intensity with the K-means/KL-index bandwidth."""
    if x.n < 3:
        raise ValueError("benchmark intensity needs at least 3 events")
    report = select_bandwidth(x.points, min(K_max, x.n - 1), seed)
    r = kernel_intensity(x, w, KernelSpec(report.h), grid)
    return r.with_values(r.values, bandwidth=report.h, P0=report.P0)


MANIFEST_KINDS = (
    "raster",
    "zones",
    "segments-density",
    "segments-distance",
    "points-density",
    "points-distance",
    "coordinate",
    "benchmark",
)


class ManifestError(ValueError):
    pass


def _resolve_bandwidth(entry, heuristic, window):
    bw = entry.get("bandwidth", "heuristic")
    if bw == "heuristic":
        return heuristic()
    if bw == "default":
        return default_segment_bandwidth(window)
    try:
        return float(bw)
    except (TypeError, ValueError):
        raise ManifestError(f"bad bandwidth {bw!r} for covariate {entry.get('name')!r}") from None


def build_from_manifest(manifest, window, grid, pattern=None, seed=0, base_dir="."):
    """Build a CovariateStack from a manifest (dict, or path to JSON).

    Entries are ``{"name", "kind", ...}`` with kind one of MANIFEST_KINDS.
    Paths are resolved against ``base_dir`` (the manifest's folder when a path
    is given). Returns the stack; ``stack.meta`` records resolved bandwidths.
    """
    if not isinstance(manifest, dict):
        path = Path(manifest)
        base_dir = path.parent
        manifest = json.loads(path.read_text(encoding="utf-8"))
    base = Path(base_dir)
    entries = manifest.get("covariates", [])
    names, sources, meta = [], [], {}
    for entry in entries:
        kind = entry.get("kind")
        name = entry.get("name", kind)
        if kind not in MANIFEST_KINDS:
            raise ManifestError(f"unknown covariate kind {kind!r}")
        p = (lambda key: base / entry[key])
        if kind == "raster":
            names.append(name)
            sources.append(RasterCovariate(pio.read_ascii_grid(p("path"))))
        elif kind == "zones":
            names.append(name)
            sources.append(ZoneCovariate(tuple(pio.read_zones(p("polygons"), p("values")))))
        elif kind in ("segments-density", "segments-distance"):
            L = pio.read_segments(p("path"))
            if kind == "segments-distance":
                names.append(name)
                sources.append(DistanceCovariate(L))
            else:
                h = _resolve_bandwidth(entry, lambda: segment_length_bandwidth(L, seed=seed).h, window)
                meta[name] = {"bandwidth": h}
                names.append(name)
                sources.append(RasterCovariate(segment_density(L, window, h, grid)))
        elif kind in ("points-density", "points-distance"):
            P = pio.read_points(p("path"), window)
            if kind == "points-distance":
                names.append(name)
                sources.append(DistanceCovariate(P))
            else:
                h = _resolve_bandwidth(entry, lambda: select_bandwidth(P.points, min(30, P.n - 1), seed).h, window)
                meta[name] = {"bandwidth": h}
                names.append(name)
                sources.append(RasterCovariate(pixel_count_density(P, grid, h)))
        elif kind == "coordinate":
            names += [entry.get("x_name", "x"), entry.get("y_name", "y")]
            sources += [CoordinateCovariate("x"), CoordinateCovariate("y")]
        elif kind == "benchmark":
            if pattern is None:
                raise ManifestError("benchmark covariate needs the event pattern")
            r = benchmark_covariate(pattern, window, grid, seed, entry.get("K_max", 30))
            meta[name] = {"bandwidth": r.meta["bandwidth"], "P0": r.meta["P0"]}
            names.append(name)
            sources.append(RasterCovariate(r))
    if not names:
        raise ManifestError("manifest lists no covariates")
    return CovariateStack(tuple(names), tuple(sources), meta=meta)
