"""K-means based bandwidth selection.

The number of clusters is chosen by maximising the Krzanowski-Lai index over
within-cluster dispersions; the bandwidth is then a weighted harmonic mean of
per-cluster dispersions, each cluster weighted by the inverse mean squared
distance from its centroid to *all* observations.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from numba import njit

__all__ = [
    "KMeansResult",
    "BandwidthReport",
    "kmeans",
    "kl_index",
    "harmonic_bandwidth",
    "select_bandwidth",
    "default_segment_bandwidth",
    "segment_length_bandwidth",
]

EPS = 1e-5
MAX_ITER = 100
N_INIT = 10


@dataclass
class KMeansResult:
    centroids: np.ndarray  # (P, d)
    labels: np.ndarray  # (n,)
    counts: np.ndarray  # (P,)
    dispersion: float  # D_P
    n_iter: int = 0
    converged: bool = True
    history: list = field(default_factory=list)


@dataclass
class BandwidthReport:
    P0: int
    kl_values: dict  # P -> KL_P
    dispersions: dict  # P -> D_P
    sigma_sq: np.ndarray
    weights: np.ndarray
    h: float
    clustering: KMeansResult
    excluded: list = field(default_factory=list)

    def to_dict(self):
        return {
            "P0": int(self.P0),
            "h": float(self.h),
            "kl": {str(p): float(v) for p, v in self.kl_values.items()},
            "dispersion": {str(p): float(v) for p, v in self.dispersions.items()},
            "sigma_sq": [float(s) for s in self.sigma_sq],
            "weights": [float(x) for x in self.weights],
            "cluster_sizes": [int(c) for c in self.clustering.counts],
            "excluded_singletons": [int(q) for q in self.excluded],
        }


def _as_2d(data):
    X = np.asarray(data, dtype=float)
    if X.ndim == 1:
        X = X[:, None]
    if X.ndim != 2:
        raise ValueError("data must be an (n, d) array")
    if not np.all(np.isfinite(X)):
        raise ValueError("data must be finite")
    return X


def _sqdist(X, C):
    # explicit differences: exact zeros for coincident points
    d2 = np.zeros((len(X), len(C)))
    for k in range(X.shape[1]):
        d2 += (X[:, k, None] - C[None, :, k]) ** 2
    return d2


def _plusplus(X, P, rng):
    first = int(rng.integers(len(X)))
    return _plusplus_kernel(np.ascontiguousarray(X), first, rng.random(P))


@njit(cache=True)
def _plusplus_kernel(X, first, u):
    n, d = X.shape
    P = u.shape[0]
    C = np.empty((P, d))
    C[0] = X[first]
    d2 = np.empty(n)
    for i in range(n):
        s = 0.0
        for k in range(d):
            t = X[i, k] - C[0, k]
            s += t * t
        d2[i] = s
    for q in range(1, P):
        cum = np.cumsum(d2)
        if cum[-1] > 0:
            i = min(np.searchsorted(cum, u[q] * cum[-1], side="right"), n - 1)
        else:
            i = min(int(u[q] * n), n - 1)
        C[q] = X[i]
        for j in range(n):
            s = 0.0
            for k in range(d):
                t = X[j, k] - C[q, k]
                s += t * t
            if s < d2[j]:
                d2[j] = s
    return C


@njit(cache=True)
def _assign(X, C, labels, own):
    n, d = X.shape
    P = C.shape[0]
    for i in range(n):
        best = np.inf
        arg = 0
        for q in range(P):
            s = 0.0
            for k in range(d):
                t = X[i, k] - C[q, k]
                s += t * t
            if s < best:
                best = s
                arg = q
        labels[i] = arg
        own[i] = best


@njit(cache=True)
def _repair(X, C, labels, own):
    """Move each empty cluster's centroid onto the worst-served point."""
    n = X.shape[0]
    P = C.shape[0]
    for _ in range(P):
        counts = np.bincount(labels, minlength=P)
        q = -1
        for k in range(P):
            if counts[k] == 0:
                q = k
                break
        if q < 0:
            return
        # only take points from clusters that can spare one
        far = -1.0
        i_far = 0
        for i in range(n):
            if counts[labels[i]] > 1 and own[i] > far:
                far = own[i]
                i_far = i
        C[q] = X[i_far]
        _assign(X, C, labels, own)
        labels[i_far] = q
        own[i_far] = 0.0


@njit(cache=True)
def _lloyd_kernel(X, C, eps, max_iter, history):
    n, d = X.shape
    P = C.shape[0]
    labels = np.zeros(n, dtype=np.int64)
    own = np.zeros(n)
    v = 0
    converged = False
    while v <= max_iter:
        _assign(X, C, labels, own)
        _repair(X, C, labels, own)
        history[v] = own.sum()
        new = np.zeros((P, d))
        counts = np.zeros(P)
        for i in range(n):
            counts[labels[i]] += 1.0
            for k in range(d):
                new[labels[i], k] += X[i, k]
        delta = 0.0
        for q in range(P):
            for k in range(d):
                new[q, k] /= counts[q]
                t = new[q, k] - C[q, k]
                delta += t * t
        C[:, :] = new
        v += 1
        if delta <= eps:
            converged = True
            break
    _assign(X, C, labels, own)
    _repair(X, C, labels, own)
    history[v] = own.sum()
    return labels, v, converged


def _lloyd(X, C, eps, max_iter):
    C = np.ascontiguousarray(C, dtype=float).copy()
    history = np.zeros(max_iter + 2)
    labels, v, converged = _lloyd_kernel(np.ascontiguousarray(X), C, float(eps), int(max_iter), history)
    P = len(C)
    counts = np.bincount(labels, minlength=P)
    D = float(_sqdist(X, C)[np.arange(len(X)), labels].sum())
    hist = [float(h) for h in history[: v + 1]]
    return KMeansResult(C, labels, counts, D, v, converged, hist)


def kmeans(data, P, seed=0, eps=EPS, max_iter=MAX_ITER, n_init=N_INIT, init=None):
    """Lloyd's K-means with k-means++ seeding and restarts.

    Stops when the summed squared centroid movement falls to ``eps`` or after
    ``max_iter`` iterations. ``P == 1`` returns the data mean. Of ``n_init``
    seeded restarts the one with the smallest within-cluster dispersion is
    kept. ``init`` (P, d) bypasses the seeding and runs once.
    """
    X = _as_2d(data)
    n = len(X)
    P = int(P)
    if P < 1:
        raise ValueError("P must be >= 1")
    if P > n:
        raise ValueError(f"cannot form {P} clusters from {n} observations")
    if P == 1:
        c = X.mean(axis=0, keepdims=True)
        D = float(((X - c) ** 2).sum())
        return KMeansResult(c, np.zeros(n, dtype=int), np.array([n]), D, 0, True, [D])
    if init is not None:
        return _lloyd(X, np.array(init, dtype=float), eps, max_iter)
    rng = np.random.default_rng([int(seed), P])
    best = None
    for _ in range(int(n_init)):
        res = _lloyd(X, _plusplus(X, P, rng), eps, max_iter)
        if best is None or res.dispersion < best.dispersion:
            best = res
    return best


def kl_index(D_prev, D_P, D_next, P, d):
    """Krzanowski-Lai index for ``P`` clusters of ``d``-dimensional data.

    A denominator below 1e-12 in magnitude yields 0.
    """
    e = 2.0 / d
    num = (P - 1) ** e * D_prev - P**e * D_P
    den = P**e * D_P - (P + 1) ** e * D_next
    if abs(den) < 1e-12:
        return 0.0
    return abs(num / den)


def harmonic_bandwidth(sigma_sq, weights):
    """sqrt(sum w / sum(w / sigma^2)): weighted harmonic mean of dispersions."""
    sigma_sq = np.asarray(sigma_sq, dtype=float)
    weights = np.asarray(weights, dtype=float)
    return math.sqrt(weights.sum() / (weights / sigma_sq).sum())


def cluster_weights(X, result):
    """Per-cluster dispersion sigma_q^2 and weight w_q = 1 / g_q."""
    X = _as_2d(X)
    n = len(X)
    P = len(result.centroids)
    d2 = _sqdist(X, result.centroids)
    within = np.bincount(result.labels, weights=d2[np.arange(n), result.labels], minlength=P)
    sigma_sq = within / (2.0 * result.counts)
    g = d2.sum(axis=0) / n
    return sigma_sq, 1.0 / g


def select_bandwidth(data, K_max=30, seed=0, eps=EPS, max_iter=MAX_ITER, n_init=N_INIT):
    """Choose the cluster count by the KL index, then the kernel bandwidth.

    Parameters
    ----------
    data : array_like, shape (n,) or (n, d)
        Observations: event coordinates, or e.g. segment lengths (d = 1).
    K_max : int
        Largest candidate cluster count; needs ``n >= K_max + 1``.
    seed : int

    Returns
    -------
    BandwidthReport
    """
    X = _as_2d(data)
    n, d = X.shape
    K_max = int(K_max)
    if n < 3:
        raise ValueError("need at least 3 observations to evaluate the KL index")
    if K_max < 2:
        raise ValueError("K_max must be >= 2")
    if n < K_max + 1:
        raise ValueError(f"K_max={K_max} needs at least {K_max + 1} observations, got {n}")

    fits = {P: kmeans(X, P, seed, eps, max_iter, n_init) for P in range(1, K_max + 2)}
    D = {P: r.dispersion for P, r in fits.items()}
    kl = {P: kl_index(D[P - 1], D[P], D[P + 1], P, d) for P in range(2, K_max + 1)}
    Ps = np.array(list(kl))
    P0 = int(Ps[np.argmax([kl[p] for p in Ps])])  # first maximum: smallest P on ties

    best = fits[P0]
    sigma_sq, w = cluster_weights(X, best)
    keep = sigma_sq > 0
    if not keep.any():
        raise ValueError("every cluster is a single point; lower K_max")
    h = harmonic_bandwidth(sigma_sq[keep], w[keep])
    return BandwidthReport(
        P0=P0,
        kl_values=kl,
        dispersions=D,
        sigma_sq=sigma_sq,
        weights=w,
        h=h,
        clustering=best,
        excluded=list(np.flatnonzero(~keep)),
    )


def default_segment_bandwidth(w):
    """One tenth of the window's bounding-box diagonal."""
    return 0.1 * w.diameter


def segment_length_bandwidth(L, K_max=30, seed=0):
    """Heuristic bandwidth from the one-dimensional sample of segment lengths."""
    lengths = L.lengths
    return select_bandwidth(lengths, min(K_max, len(lengths) - 1), seed)
