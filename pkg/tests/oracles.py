"""Independent reference implementations used as test oracles.

Nothing here imports the package under test. The algorithms are chosen to
differ from the package's: full Newton instead of coordinate descent, pure
Python loops instead of vectorised kernels, dense sampling instead of
closed forms.
"""

import math

import numpy as np


def newton_poisson(X, w, y, iters=100, tol=1e-13):
    """Unpenalised weighted Poisson GLM with intercept by damped full Newton.

    Maximises sum_j w_j (y_j eta_j - exp(eta_j)), eta = b0 + X b.
    """
    X = np.asarray(X, dtype=float)
    A = np.column_stack([np.ones(len(X)), X])
    theta = np.zeros(A.shape[1])
    theta[0] = math.log(np.sum(w * y) / np.sum(w))

    def ll(t):
        eta = A @ t
        return float(np.sum(w * (y * eta - np.exp(eta))))

    cur = ll(theta)
    for _ in range(iters):
        mu = np.exp(A @ theta)
        g = A.T @ (w * (y - mu))
        H = A.T @ (A * (w * mu)[:, None])
        step = np.linalg.solve(H, g)
        s = 1.0
        while ll(theta + s * step) < cur - 1e-14 * abs(cur) and s > 1e-8:
            s /= 2
        theta = theta + s * step
        new = ll(theta)
        if abs(new - cur) <= tol * max(1.0, abs(cur)) and np.max(np.abs(s * step)) < 1e-12:
            cur = new
            break
        cur = new
    return theta


def loglik_loop(w, y, eta):
    """sum w (y eta - e^eta), accumulated in reverse order with fsum."""
    terms = [wj * (yj * ej - math.exp(ej)) for wj, yj, ej in zip(w, y, eta)]
    return math.fsum(reversed(terms))


def deviance_loop(w, y, mu):
    tot = 0.0
    for wj, yj, mj in zip(w, y, mu):
        t = -(yj - mj)
        if yj > 0:
            t += yj * math.log(yj / mj)
        tot += 2 * wj * t
    return tot


def point_segment_distance_sampled(p, seg, samples=200001):
    """Min distance from p to a segment by dense sampling along it."""
    t = np.linspace(0.0, 1.0, samples)
    xs = seg[0] + t * (seg[2] - seg[0])
    ys = seg[1] + t * (seg[3] - seg[1])
    return float(np.min(np.hypot(xs - p[0], ys - p[1])))


def point_segment_distance_loop(p, seg):
    """Exact distance by projecting onto the segment, scalar arithmetic only."""
    px, py = p
    x1, y1, x2, y2 = seg
    dx, dy = x2 - x1, y2 - y1
    L2 = dx * dx + dy * dy
    t = ((px - x1) * dx + (py - y1) * dy) / L2 if L2 > 0 else 0.0
    t = min(1.0, max(0.0, t))
    return math.hypot(px - (x1 + t * dx), py - (y1 + t * dy))


def brute_nearest(points, segments):
    return np.array([min(point_segment_distance_loop(p, s) for s in segments) for p in points])


def grid_weights_loop(events, bbox, T, inside_fn, area):
    """Quadrature weights by explicit per-tile bookkeeping.

    Returns (weights in event-then-dummy order, kept tile count).
    """
    xmin, ymin, xmax, ymax = bbox
    tw, th = (xmax - xmin) / T, (ymax - ymin) / T
    kept = []
    for r in range(T):
        for c in range(T):
            cx, cy = xmin + (c + 0.5) * tw, ymin + (r + 0.5) * th
            if inside_fn(cx, cy):
                kept.append((r, c))
    kept_set = set(kept)
    owner = []
    for ex, ey in events:
        c = min(T - 1, max(0, int(math.floor((ex - xmin) / tw))))
        r = min(T - 1, max(0, int(math.floor((ey - ymin) / th))))
        if (r, c) not in kept_set:
            best = min(kept, key=lambda rc: ((xmin + (rc[1] + 0.5) * tw) - ex) ** 2 + ((ymin + (rc[0] + 0.5) * th) - ey) ** 2)
            r, c = best
        owner.append((r, c))
    counts = {}
    for rc in owner + kept:
        counts[rc] = counts.get(rc, 0) + 1
    delta = area / len(kept)
    return [delta / counts[rc] for rc in owner + kept], len(kept)


def kl_by_hand(D_prev, D_P, D_next, P, d):
    e = 2.0 / d
    return abs(((P - 1) ** e * D_prev - P**e * D_P) / (P**e * D_P - (P + 1) ** e * D_next))


def gaussian_kernel_mass_grid(points, h, grid_x, grid_y):
    """Point-sampled Gaussian kernel sum on a fine grid (no edge correction)."""
    gx, gy = np.meshgrid(grid_x, grid_y)
    out = np.zeros_like(gx)
    for px, py in points:
        out += np.exp(-((gx - px) ** 2 + (gy - py) ** 2) / (2 * h * h)) / (2 * math.pi * h * h)
    return out


def soft_threshold_scalar(z, t):
    if z > t:
        return z - t
    if z < -t:
        return z + t
    return 0.0
