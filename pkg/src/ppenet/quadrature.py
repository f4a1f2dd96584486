"""Grid quadrature for the Poisson point-process likelihood.

The window is cut into ``T x T`` equal tiles over its bounding box; a tile is
kept when its centre lies in the window. Each kept tile receives one dummy
point, and every quadrature point ``s_j`` gets weight ``w_j = tile_area / E_j``
where ``E_j`` counts events plus dummies sharing its tile. With responses
``y_j = a_j / w_j`` the likelihood becomes a weighted Poisson GLM.
"""

from __future__ import annotations

import csv
import warnings
from dataclasses import dataclass

import numpy as np

from .geom import contains

__all__ = [
    "QuadratureScheme",
    "build_grid_scheme",
    "loglik",
    "deviance",
    "poisson_deviance",
    "clamp_eta",
    "ETA_CLAMP",
    "write_scheme_csv",
]

ETA_CLAMP = 700.0


class ResolutionError(ValueError):
    pass


@dataclass(frozen=True)
class QuadratureScheme:
    points: np.ndarray  # (m, 2)
    is_event: np.ndarray  # (m,) int 0/1
    weights: np.ndarray
    responses: np.ndarray
    tile_area: float
    counts: np.ndarray  # E_j
    tile: np.ndarray  # tile id per point
    tiles_per_side: int
    dummy_mode: str = "systematic"

    @property
    def m(self):
        return len(self.weights)

    @property
    def n_events(self):
        return int(self.is_event.sum())

    @property
    def n_dummies(self):
        return self.m - self.n_events

    def subset(self, rows):
        """Rows of the scheme with their original weights (used for CV folds)."""
        rows = np.asarray(rows)
        return QuadratureScheme(
            self.points[rows],
            self.is_event[rows],
            self.weights[rows],
            self.responses[rows],
            self.tile_area,
            self.counts[rows],
            self.tile[rows],
            self.tiles_per_side,
            self.dummy_mode,
        )

    def metadata(self):
        return {
            "tiles_per_side": int(self.tiles_per_side),
            "dummy_mode": self.dummy_mode,
            "n_events": self.n_events,
            "n_dummies": self.n_dummies,
            "tile_area": float(self.tile_area),
        }


def build_grid_scheme(x, w, tiles_per_side, dummy_mode="systematic", seed=0):
    """Build the grid quadrature scheme for pattern ``x`` in window ``w``.

    Parameters
    ----------
    x : PointPattern
    w : Window
    tiles_per_side : int
        Tiles along each side of the bounding box; one dummy per in-window tile.
    dummy_mode : {"systematic", "random"}
        Dummy at the tile centre, or uniform within the tile (redrawn when it
        falls outside the window, falling back to the tile centre after 100
        attempts).
    seed : int
        Seed for random dummies.
    """
    T = int(tiles_per_side)
    if T < 1:
        raise ResolutionError("tiles_per_side must be >= 1")
    if dummy_mode not in ("systematic", "random"):
        raise ValueError(f"unknown dummy_mode {dummy_mode!r}")
    events = np.asarray(x.points, dtype=float).reshape(-1, 2)
    if len(events) and not np.all(contains(w, events)):
        raise ValueError("pattern has points outside the window")

    xmin, ymin, xmax, ymax = w.bbox
    tw, th = (xmax - xmin) / T, (ymax - ymin) / T
    cx = xmin + (np.arange(T) + 0.5) * tw
    cy = ymin + (np.arange(T) + 0.5) * th
    gx, gy = np.meshgrid(cx, cy)
    centers = np.column_stack([gx.ravel(), gy.ravel()])  # tile id = row * T + col
    inside = contains(w, centers)
    kept = np.flatnonzero(inside)
    if kept.size == 0:
        raise ResolutionError("no tile centre falls inside the window; increase tiles_per_side")
    delta = w.area / kept.size

    col = np.clip(np.floor((events[:, 0] - xmin) / tw).astype(int), 0, T - 1)
    row = np.clip(np.floor((events[:, 1] - ymin) / th).astype(int), 0, T - 1)
    ev_tile = row * T + col
    stray = ~inside[ev_tile]
    if np.any(stray):
        # events digitised on the edge of an out-of-window tile
        d2 = ((events[stray, None, :] - centers[None, kept, :]) ** 2).sum(-1)
        ev_tile[stray] = kept[np.argmin(d2, axis=1)]

    if dummy_mode == "systematic":
        dummies = centers[kept].copy()
    else:
        rng = np.random.default_rng(seed)
        lo = centers[kept] - np.array([tw / 2, th / 2])
        dummies = lo + rng.random((kept.size, 2)) * np.array([tw, th])
        bad = ~contains(w, dummies)
        for _ in range(99):
            if not bad.any():
                break
            idx = np.flatnonzero(bad)
            dummies[idx] = lo[idx] + rng.random((idx.size, 2)) * np.array([tw, th])
            bad[idx] = ~contains(w, dummies[idx])
        dummies[bad] = centers[kept][bad]

    n = len(events)
    tile = np.concatenate([ev_tile, kept])
    counts_per_tile = np.bincount(tile, minlength=T * T)
    counts = counts_per_tile[tile]
    weights = delta / counts
    is_event = np.concatenate([np.ones(n, dtype=np.int8), np.zeros(kept.size, dtype=np.int8)])
    responses = is_event / weights
    return QuadratureScheme(
        points=np.vstack([events, dummies]),
        is_event=is_event,
        weights=weights,
        responses=responses,
        tile_area=delta,
        counts=counts,
        tile=tile,
        tiles_per_side=T,
        dummy_mode=dummy_mode,
    )


def clamp_eta(eta):
    """Clip the linear predictor to +/-700, warning when clipping happens."""
    eta = np.asarray(eta, dtype=float)
    if np.any(np.abs(eta) > ETA_CLAMP):
        warnings.warn("linear predictor clipped to +/-700; fit may be non-finite", RuntimeWarning, stacklevel=3)
        eta = np.clip(eta, -ETA_CLAMP, ETA_CLAMP)
    return eta


def linear_predictor(Z, theta):
    beta0, beta = theta
    Z = np.asarray(Z, dtype=float)
    beta = np.asarray(beta, dtype=float)
    if Z.ndim == 1:
        Z = Z[:, None]
    if beta.size == 0:
        return np.full(Z.shape[0], float(beta0))
    return beta0 + Z @ beta


def loglik(q, Z, theta):
    """Weighted Poisson log-likelihood sum_j w_j (y_j eta_j - exp(eta_j))."""
    Z = np.asarray(Z, dtype=float).reshape(q.m, -1)
    eta = clamp_eta(linear_predictor(Z, theta))
    return float(np.sum(q.weights * (q.responses * eta - np.exp(eta))))


def poisson_deviance(w, y, mu):
    """2 sum w [y log(y/mu) - (y - mu)], with 0 log 0 = 0."""
    mu = np.asarray(mu, dtype=float)
    if np.any(~(mu > 0)):
        raise ValueError("fitted intensities must be positive")
    y = np.asarray(y, dtype=float)
    pos = y > 0
    ylog = np.zeros_like(y)
    ylog[pos] = y[pos] * np.log(y[pos] / mu[pos])
    return float(2.0 * np.sum(w * (ylog - (y - mu))))


def deviance(q, mu_j):
    return poisson_deviance(q.weights, q.responses, mu_j)


def write_scheme_csv(path, q):
    with open(path, "w", newline="", encoding="utf-8") as fh:
        out = csv.writer(fh, lineterminator="\n")
        out.writerow(["x", "y", "a", "w", "y_resp"])
        for (px, py), a, wj, yj in zip(q.points, q.is_event, q.weights, q.responses):
            out.writerow([repr(float(px)), repr(float(py)), int(a), repr(float(wj)), repr(float(yj))])
