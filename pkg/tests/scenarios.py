"""Synthetic scenarios shared by the unit and acceptance tests."""

import math

import numpy as np

from ppenet.covariates import CovariateStack, FunctionCovariate, eval_at
from ppenet.geom import PointPattern, Window
from ppenet.quadrature import build_grid_scheme
from ppenet.sim_eval import simulate_poisson

UNIT = Window.rectangle(0, 0, 1, 1)


def wave_stack(K=10, seed=2024):
    """K smooth fields sqrt(2) cos(a x + b y + c): roughly mean 0, variance 1 on the unit square."""
    rng = np.random.default_rng(seed)
    freq = rng.uniform(-2.5 * math.pi, 2.5 * math.pi, (K, 2))
    phase = rng.uniform(0, 2 * math.pi, K)
    sources = tuple(
        FunctionCovariate(lambda x, y, a=a, b=b, c=c: math.sqrt(2) * np.cos(a * x + b * y + c))
        for (a, b), c in zip(freq, phase)
    )
    return CovariateStack(tuple(f"z{k + 1}" for k in range(K)), sources)


PLANTED_BETA = np.array([0.0] * 8 + [1.0, -1.0])


def planted_pattern(seed, n_target=2000, stack=None):
    """Poisson pattern with log-intensity b0 + z9 - z10 and expected count n_target."""
    stack = wave_stack() if stack is None else stack
    g = (np.arange(200) + 0.5) / 200
    gx, gy = np.meshgrid(g, g)
    grid_pts = np.column_stack([gx.ravel(), gy.ravel()])
    lin = eval_at(stack, grid_pts) @ PLANTED_BETA
    b0 = math.log(n_target / np.mean(np.exp(lin)))

    def rho(x, y):
        return np.exp(b0 + eval_at(stack, np.column_stack([x, y])) @ PLANTED_BETA)

    upper = math.exp(b0 + 2 * math.sqrt(2))
    return simulate_poisson(rho, UNIT, seed, upper=upper), b0


def random_glm_instance(seed, m_max=500, K_max=8):
    """Small weighted Poisson regression built from a real quadrature scheme."""
    rng = np.random.default_rng(seed)
    n = int(rng.integers(20, 120))
    T = int(rng.integers(6, 19))
    while n + T * T > m_max:
        T -= 1
    x = PointPattern(rng.random((n, 2)), UNIT)
    q = build_grid_scheme(x, UNIT, T)
    K = int(rng.integers(1, K_max + 1))
    Z = rng.standard_normal((q.m, K))
    Z[:, 0] += 0.8 * q.is_event  # some signal so the MLE is interesting
    Z = (Z - Z.mean(0)) / Z.std(0)
    return q, Z


def kkt_problem(seed=0, m=5000, K=50):
    """m quadrature rows, K correlated standardised covariates, sparse signal."""
    rng = np.random.default_rng(seed)
    T = int(math.sqrt(0.72 * m))
    n = m - T * T
    q = build_grid_scheme(PointPattern(rng.random((n, 2)), UNIT), UNIT, T)
    latent = rng.standard_normal((q.m, 5))
    Z = latent @ rng.standard_normal((5, K)) * 0.5 + rng.standard_normal((q.m, K))
    Z[:, :5] += 0.6 * q.is_event[:, None] * np.array([1, -1, 0.5, -0.5, 0.25])
    Z = (Z - Z.mean(0)) / Z.std(0)
    return q, Z


def perf_problem(seed=0):
    """m = 10,000 rows, K = 100 covariates."""
    rng = np.random.default_rng(seed)
    T = 90
    n = 10_000 - T * T
    q = build_grid_scheme(PointPattern(rng.random((n, 2)), UNIT), UNIT, T)
    Z = rng.standard_normal((q.m, 100))
    Z[:, :10] += 0.5 * q.is_event[:, None]
    Z = (Z - Z.mean(0)) / Z.std(0)
    return q, Z


def blobs(seed, centers, sizes, sigma):
    rng = np.random.default_rng(seed)
    return np.vstack([c + sigma * rng.standard_normal((s, 2)) for c, s in zip(centers, sizes)])


def three_blobs(seed):
    return blobs(seed, [(0.0, 0.0), (10.0, 0.0), (5.0, 9.0)], [50, 50, 50], 0.1)


def sixteen_blobs(seed):
    """Jittered 4 x 4 lattice (spacing 10) of tight clusters of 30-70 points."""
    rng = np.random.default_rng(seed)
    lattice = np.array([(i, j) for i in range(4) for j in range(4)], float) * 10
    centers = lattice + rng.uniform(-2, 2, (16, 2))
    sizes = rng.integers(30, 71, 16)
    return blobs(seed + 10_000, centers, sizes, 0.1)
