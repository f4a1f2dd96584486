"""Poisson simulation and undersampling stability evaluation."""

from __future__ import annotations

import csv
import json
import warnings
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import io as pio
from .geom import PointPattern, Raster, contains, rasterize
from .penfit import FitConfig, fit_intensity, minmax

__all__ = [
    "simulate_poisson",
    "undersample",
    "split_train_test",
    "stability_eval",
    "StabilityReport",
]

BOUND_GRID = 256


def _intensity_at(intensity, pts):
    if isinstance(intensity, Raster):
        r, c = intensity.cell_index(pts)
        v = intensity.values[r, c]
        return np.where(np.isfinite(v), v, 0.0)
    if callable(intensity):
        return np.asarray(intensity(pts[:, 0], pts[:, 1]), dtype=float) * np.ones(len(pts))
    return np.full(len(pts), float(intensity))


def _upper_bound(intensity, w):
    if isinstance(intensity, Raster):
        v = intensity.values[np.isfinite(intensity.values)]
        return float(v.max()) if v.size else 0.0
    if not callable(intensity):
        return float(intensity)
    xmin, ymin, xmax, ymax = w.bbox
    gx, gy = np.meshgrid(np.linspace(xmin, xmax, BOUND_GRID), np.linspace(ymin, ymax, BOUND_GRID))
    v = _intensity_at(intensity, np.column_stack([gx.ravel(), gy.ravel()]))
    warnings.warn("no upper bound given for the intensity function; using 1.1 x its maximum on a grid", stacklevel=3)
    return 1.1 * float(v.max())


def simulate_poisson(intensity, w, seed=0, upper=None):
    """Inhomogeneous Poisson pattern in ``w`` by thinning.

    Parameters
    ----------
    intensity : float, Raster or callable ``f(x, y)``
        Events per unit area. Raster nodata counts as zero.
    w : Window
    seed : int
    upper : float, optional
        Bound on the intensity over ``w``; computed when omitted (exact for
        constants and rasters, a padded grid maximum for functions).

    Returns
    -------
    PointPattern
    """
    rng = np.random.default_rng(seed)
    lam = _upper_bound(intensity, w) if upper is None else float(upper)
    if not np.isfinite(lam) or lam < 0:
        raise ValueError("intensity bound must be finite and non-negative")
    if lam == 0:
        return PointPattern(np.empty((0, 2)), w)
    xmin, ymin, xmax, ymax = w.bbox
    n = rng.poisson(lam * (xmax - xmin) * (ymax - ymin))
    pts = np.column_stack([rng.uniform(xmin, xmax, n), rng.uniform(ymin, ymax, n)])
    rho = _intensity_at(intensity, pts)
    if np.any(rho > lam * (1 + 1e-12)):
        raise ValueError(f"intensity exceeds the bound {lam:g}")
    keep = (rng.random(n) * lam < rho) & contains(w, pts)
    return PointPattern(pts[keep], w)


def _sample_size(fraction, n):
    return int(np.floor(fraction * n + 0.5))


def undersample(x, fraction, seed=0):
    """Simple random sample of round(fraction * n) events, in original order."""
    if not 0 < fraction <= 1:
        raise ValueError("fraction must lie in (0, 1]")
    rng = np.random.default_rng(seed)
    k = _sample_size(fraction, x.n)
    idx = np.sort(rng.choice(x.n, size=k, replace=False))
    return x.subset(idx)


def split_train_test(x, fraction, seed=0):
    """Disjoint (train, test) split with round(fraction * n) training events."""
    if not 0 < fraction < 1:
        raise ValueError("fraction must lie in (0, 1)")
    rng = np.random.default_rng(seed)
    perm = rng.permutation(x.n)
    k = _sample_size(fraction, x.n)
    return x.subset(np.sort(perm[:k])), x.subset(np.sort(perm[k:]))


@dataclass
class StabilityReport:
    R: int
    fraction: float
    mae: Raster
    q05: Raster
    q95: Raster
    mean: float
    sd: float
    n_failed: int = 0
    failures: list = field(default_factory=list)
    model: str = "opt"
    normalized: bool = True

    def to_dict(self):
        return {
            "replicates": int(self.R),
            "fraction": float(self.fraction),
            "model": self.model,
            "normalized": bool(self.normalized),
            "mae_mean": float(self.mean),
            "mae_sd": float(self.sd),
            "n_failed": int(self.n_failed),
            "failures": list(self.failures),
        }

    def profile(self):
        """Pixels sorted by MAE with their quantile bands: (rank share, mae, q05, q95)."""
        ok = np.isfinite(self.mae.values)
        mae = self.mae.values[ok]
        order = np.argsort(mae, kind="stable")
        share = (np.arange(mae.size) + 0.5) / max(mae.size, 1)
        return np.column_stack([share, mae[order], self.q05.values[ok][order], self.q95.values[ok][order]])

    def write(self, outdir, prefix="stability", extra=None):
        out = Path(outdir)
        out.mkdir(parents=True, exist_ok=True)
        for name in ("mae", "q05", "q95"):
            pio.write_ascii_grid(out / f"{prefix}_{name}.asc", getattr(self, name))
        with open(out / f"{prefix}_profile.csv", "w", newline="", encoding="utf-8") as fh:
            wr = csv.writer(fh, lineterminator="\n")
            wr.writerow(["pixel_share", "mae", "q05", "q95"])
            for row in self.profile():
                wr.writerow([repr(float(v)) for v in row])
        doc = self.to_dict()
        if extra:
            doc.update(extra)
        (out / f"{prefix}.json").write_text(json.dumps(doc, indent=2, sort_keys=True) + "\n", encoding="utf-8")


def stability_eval(x, stack, fit_config=FitConfig(), R=100, fraction=0.7, seed=0, grid=None, model="opt", normalize=True, threads=1):
    """Pixel-wise stability of a fitted intensity under undersampling.

    The full-data fit is the reference. Each of ``R`` replicates refits the
    whole pipeline (including lambda selection, with the same CV seed) on an
    undersample drawn with seed ``(seed, r)``, and records the absolute
    difference to the reference per pixel.

    Parameters
    ----------
    model : {"opt", "1se"}
        Dense or sparse model.
    normalize : bool
        Min-max rescale each raster to [0, 1] before differencing.
    grid : Raster, optional
        Prediction grid; defaults to 100 cells across the window's longer side.
    """
    if R < 1:
        raise ValueError("R must be >= 1")
    if grid is None:
        xmin, ymin, xmax, ymax = x.window.bbox
        grid = rasterize(x.window, max(xmax - xmin, ymax - ymin) / 100)

    def surface(pattern):
        r = fit_intensity(pattern, stack, fit_config).predict(grid, model)
        return minmax(r.values) if normalize else r.values

    ref = surface(x)

    def replicate(r):
        sub = undersample(x, fraction, [int(seed), r])
        try:
            return np.abs(ref - surface(sub)), None
        except (ValueError, FloatingPointError) as err:
            return None, f"replicate {r}: {err}"

    if threads and threads > 1:
        with ThreadPoolExecutor(max_workers=int(threads)) as ex:
            results = list(ex.map(replicate, range(R)))
    else:
        results = [replicate(r) for r in range(R)]
    errs = [e for e, _ in results if e is not None]
    failures = [msg for _, msg in results if msg is not None]
    if not errs:
        raise RuntimeError(f"all {R} replicate fits failed: {failures[:3]}")
    stack_err = np.stack(errs)
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", RuntimeWarning)
        mae = np.nanmean(stack_err, axis=0)
        q05 = np.nanquantile(stack_err, 0.05, axis=0)
        q95 = np.nanquantile(stack_err, 0.95, axis=0)
    px = mae[np.isfinite(mae)]
    return StabilityReport(
        R=R,
        fraction=float(fraction),
        mae=grid.with_values(mae),
        q05=grid.with_values(q05),
        q95=grid.with_values(q95),
        mean=float(px.mean()),
        sd=float(px.std(ddof=1)) if px.size > 1 else 0.0,
        n_failed=len(failures),
        failures=failures,
        model=model,
        normalized=normalize,
    )
