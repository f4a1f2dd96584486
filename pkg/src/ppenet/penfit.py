"""Elastic-net penalised Poisson intensity fitting.

The objective is

    -(1/m) sum_j w_j (y_j eta_j - exp(eta_j)) + lam * sum_k ((1-alpha)/2 b_k^2 + alpha |b_k|)

with eta_j = b0 + z_j . b and the intercept unpenalised. Each outer IRLS
iteration forms working responses y*_j = eta_j + y_j / exp(eta_j) - 1 and
weights u_j = w_j exp(eta_j), then solves the penalised weighted
least-squares problem by cyclic coordinate descent with soft-thresholding.
Coordinate descent runs on the weighted Gram matrix of the current working
set, so a sweep costs O(K^2) rather than O(mK).
"""

from __future__ import annotations

import math
import warnings
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np
from numba import njit

from .covariates import eval_at, standardize
from .quadrature import ETA_CLAMP, build_grid_scheme, clamp_eta, poisson_deviance

__all__ = [
    "PenaltySpec",
    "FitState",
    "FitPath",
    "CVResult",
    "FitDivergedError",
    "irls_working",
    "soft_threshold",
    "penalized_objective",
    "kkt_violations",
    "cd_solve",
    "lambda_max",
    "lambda_path",
    "fit_path",
    "cv_select",
    "make_folds",
    "predict_intensity",
    "back_transform",
    "FitConfig",
    "FittedModel",
    "fit_intensity",
]

ALPHA_FLOOR = 1e-3


class FitDivergedError(FloatingPointError):
    pass


@dataclass(frozen=True)
class PenaltySpec:
    alpha: float = 0.95
    lam: float = 0.0

    def __post_init__(self):
        if not 0.0 <= self.alpha <= 1.0:
            raise ValueError("alpha must lie in [0, 1]")
        if not self.lam >= 0.0:
            raise ValueError("lambda must be >= 0")


@dataclass
class FitState:
    beta0: float
    beta: np.ndarray
    eta: np.ndarray
    objective: float = math.nan
    converged: bool = True
    n_outer: int = 0
    max_kkt: float = math.nan
    history: list = field(default_factory=list, repr=False)  # objective after each outer iteration

    @property
    def mu(self):
        return np.exp(self.eta)

    @property
    def nnz(self):
        return int(np.count_nonzero(self.beta))


def _design(Z, m):
    Z = np.asarray(Z, dtype=float)
    if Z.ndim == 1:
        Z = Z[:, None]
    if Z.shape[0] != m:
        raise ValueError(f"design has {Z.shape[0]} rows, scheme has {m}")
    return Z


def _eta(Z, beta0, beta):
    if beta.size == 0:
        return np.full(Z.shape[0], float(beta0))
    nz = np.flatnonzero(beta)
    if nz.size == 0:
        return np.full(Z.shape[0], float(beta0))
    return beta0 + Z[:, nz] @ beta[nz]


def soft_threshold(z, theta):
    """sign(z) * max(|z| - theta, 0)."""
    if np.any(np.asarray(theta) < 0):
        raise ValueError("threshold must be non-negative")
    return np.sign(z) * np.maximum(np.abs(z) - theta, 0.0)


def irls_working(q, Z, state):
    """Working response y* and weights u at ``state.eta``."""
    eta = np.clip(np.asarray(state.eta, dtype=float), -ETA_CLAMP, ETA_CLAMP)
    mu = np.exp(eta)
    ystar = eta + q.responses / mu - 1.0
    u = q.weights * mu
    return ystar, u


def intercept_only(q):
    """Intercept-only weighted Poisson MLE: log(sum w y / sum w)."""
    tot = float(np.sum(q.weights * q.responses))
    if tot <= 0:
        raise ValueError("cannot fit an intensity to a pattern with no events")
    return math.log(tot / float(np.sum(q.weights)))


def penalized_objective(q, Z, beta0, beta, spec, eta=None):
    """-(1/m) log-likelihood + elastic-net penalty (intercept excluded)."""
    Z = _design(Z, q.m)
    beta = np.asarray(beta, dtype=float)
    if eta is None:
        eta = _eta(Z, beta0, beta)
    eta = np.clip(eta, -ETA_CLAMP, ETA_CLAMP)
    ll = float(np.sum(q.weights * (q.responses * eta - np.exp(eta))))
    pen = spec.lam * float(np.sum(0.5 * (1.0 - spec.alpha) * beta**2 + spec.alpha * np.abs(beta)))
    return -ll / q.m + pen


def _gradient(q, Z, eta):
    """(1/m) sum_j w_j (y_j - mu_j) [1, z_j]: intercept first."""
    resid = q.weights * q.responses - q.weights * np.exp(eta)
    g0 = resid.sum() / q.m
    return g0, (resid @ Z) / q.m if Z.shape[1] else np.zeros(0)


def kkt_violations(q, Z, beta0, beta, spec, eta=None):
    """Per-coordinate optimality residuals; index 0 is the intercept.

    Active coordinates: |g_k - lam (1-alpha) b_k - lam alpha sign(b_k)|.
    Zero coordinates: max(0, |g_k| - lam alpha).
    """
    Z = _design(Z, q.m)
    beta = np.asarray(beta, dtype=float)
    if eta is None:
        eta = _eta(Z, beta0, beta)
    g0, g = _gradient(q, Z, np.clip(eta, -ETA_CLAMP, ETA_CLAMP))
    l1 = spec.lam * spec.alpha
    l2 = spec.lam * (1.0 - spec.alpha)
    active = beta != 0
    v = np.where(active, np.abs(g - l2 * beta - l1 * np.sign(beta)), np.maximum(0.0, np.abs(g) - l1))
    return np.concatenate([[abs(g0)], v])


@njit(cache=True)
def _cd_gram(G, c, theta, l1, l2, tol, max_cycles):
    """Coordinate descent on 0.5 t'Gt - c't + penalty; t[0] unpenalised."""
    p = c.shape[0]
    r = c - G @ theta  # r_k = c_k - sum_h G_kh t_h
    cycles = 0
    while cycles < max_cycles:
        cycles += 1
        maxd = 0.0
        for k in range(p):
            gkk = G[k, k]
            old = theta[k]
            zk = r[k] + gkk * old
            if k == 0:
                new = zk / gkk if gkk > 0 else 0.0
            else:
                den = gkk + l2
                if den <= 0.0:
                    new = 0.0
                elif zk > l1:
                    new = (zk - l1) / den
                elif zk < -l1:
                    new = (zk + l1) / den
                else:
                    new = 0.0
            d = new - old
            if d != 0.0:
                theta[k] = new
                for h in range(p):
                    r[h] -= G[h, k] * d
                ad = abs(d)
                if ad > maxd:
                    maxd = ad
        big = 1.0
        for k in range(1, p):
            if abs(theta[k]) > big:
                big = abs(theta[k])
        if maxd < tol * big:
            break
    return cycles


def cd_solve(
    q,
    Z,
    spec,
    warm=None,
    tol=1e-7,
    max_outer=100,
    inner_tol=None,
    max_cycles=100000,
    kkt_tol=1e-8,
    screen=None,
):
    """Penalised IRLS with coordinate-descent inner solves.

    Parameters
    ----------
    q : QuadratureScheme
    Z : ndarray (m, K)
        Design, normally standardised.
    spec : PenaltySpec
    warm : FitState, optional
        Starting point; defaults to the intercept-only fit.
    tol : float
        Relative change in the penalised objective for outer convergence.
    inner_tol : float
        Coordinate descent stops when the largest coefficient change is below
        ``inner_tol * max(1, max|b|)``; defaults to ``tol * 1e-3``.
    kkt_tol : float
        Outer convergence additionally requires every optimality residual to
        be below this.
    screen : array of bool, optional
        Initial working set; coordinates outside it are added back when their
        gradient violates optimality.

    Returns
    -------
    FitState
    """
    Z = _design(Z, q.m)
    m, K = Z.shape
    inner_tol = tol * 1e-3 if inner_tol is None else inner_tol
    l1 = spec.lam * spec.alpha
    l2 = spec.lam * (1.0 - spec.alpha)

    if warm is None:
        beta0, beta = intercept_only(q), np.zeros(K)
    else:
        beta0, beta = float(warm.beta0), np.array(warm.beta, dtype=float)
    eta = _eta(Z, beta0, beta)
    obj = penalized_objective(q, Z, beta0, beta, spec, eta)
    if not np.isfinite(obj):
        raise FitDivergedError("objective is not finite at the starting point")

    work = np.ones(K, dtype=bool) if screen is None else np.asarray(screen, dtype=bool).copy()
    work |= beta != 0
    w_y = q.weights * q.responses
    converged = False
    n_outer = 0
    viol = np.full(K + 1, np.inf)
    history = [obj]
    while n_outer < max_outer:
        n_outer += 1
        idx = np.flatnonzero(work)
        eta_c = np.clip(eta, -ETA_CLAMP, ETA_CLAMP)
        mu = np.exp(eta_c)
        u = q.weights * mu
        Zs = Z[:, idx]
        # u * y* written without y/mu to avoid huge intermediates
        uy = u * eta_c + w_y - u
        Zu = Zs * u[:, None]
        G = np.empty((idx.size + 1, idx.size + 1))
        G[0, 0] = u.sum()
        G[0, 1:] = G[1:, 0] = Zu.sum(axis=0)
        G[1:, 1:] = Zs.T @ Zu
        G /= m
        c = np.concatenate([[uy.sum()], uy @ Zs]) / m
        theta = np.concatenate([[beta0], beta[idx]])
        _cd_gram(G, c, theta, l1, l2, inner_tol, max_cycles)

        target_beta = _scatter(theta[1:], idx, K)
        new_beta = target_beta
        new_beta0 = float(theta[0])
        new_eta = _eta(Z, new_beta0, new_beta)
        new_obj = penalized_objective(q, Z, new_beta0, new_beta, spec, new_eta)
        step = 1.0
        slack = 1e-12 * max(1.0, abs(obj))
        while not (new_obj <= obj + slack) and step > 1e-10:
            # damped Newton step keeps the objective non-increasing
            step *= 0.5
            new_beta0 = beta0 + step * (float(theta[0]) - beta0)
            new_beta = beta + step * (target_beta - beta)
            new_eta = _eta(Z, new_beta0, new_beta)
            new_obj = penalized_objective(q, Z, new_beta0, new_beta, spec, new_eta)
        if not np.isfinite(new_obj):
            raise FitDivergedError(
                f"penalised objective diverged at outer iteration {n_outer} (lambda={spec.lam:g}, alpha={spec.alpha:g})"
            )
        rel = abs(obj - new_obj) / max(abs(new_obj), 1e-300)
        moved = new_obj < obj
        if moved or step == 1.0:
            beta0, beta, eta, obj = new_beta0, new_beta, new_eta, new_obj
        history.append(obj)
        viol = kkt_violations(q, Z, beta0, beta, spec, eta)
        outside = (~work) & (viol[1:] > 0)
        if np.any(outside):
            work |= outside
            continue
        if rel < tol and viol.max() < kkt_tol:
            converged = True
            break
        if not moved and step < 1e-10:
            # no further progress is possible in floating point
            converged = viol.max() < max(kkt_tol, 1e-6)
            break
    beta = np.where(np.abs(beta) > 0, beta, 0.0)
    return FitState(beta0, beta, eta, obj, converged, n_outer, float(viol.max()), history)


def _scatter(vals, idx, K):
    out = np.zeros(K)
    out[idx] = vals
    return out


def lambda_max(q, Z, alpha):
    """Smallest lambda at which every penalised coefficient is zero."""
    Z = _design(Z, q.m)
    a = max(alpha, ALPHA_FLOOR)
    b0 = intercept_only(q)
    mu0 = math.exp(b0)
    u0 = q.weights * mu0
    ystar = b0 + q.responses / mu0 - 1.0
    ybar = float(np.sum(u0 * ystar) / np.sum(u0))
    if Z.shape[1] == 0:
        return 0.0
    score = np.abs((u0 * (ystar - ybar)) @ Z) / q.m
    return float(score.max() / a)


def lambda_path(q, Z, alpha, T=100, ratio=None):
    """Geometric lambda sequence from lambda_max down to ratio * lambda_max."""
    Z = _design(Z, q.m)
    if T < 1:
        raise ValueError("path length must be >= 1")
    if ratio is None:
        ratio = 1e-2 if Z.shape[1] >= q.m else 1e-4
    # nudge so rounding in the solver cannot leave a coefficient active at lambda_max
    lmax = lambda_max(q, Z, alpha) * (1.0 + 1e-9)
    if lmax <= 0:
        raise ValueError("lambda_max is zero: covariates carry no signal about the events")
    if T == 1:
        return np.array([lmax])
    return lmax * np.geomspace(1.0, ratio, T)


def back_transform(beta0, beta, center=None, scale=None, keep=None, n_raw=None):
    """Map standardised-scale coefficients to the raw covariate scale.

    ``keep`` indexes the raw columns that survived standardisation; dropped
    columns get coefficient 0.
    """
    beta = np.asarray(beta, dtype=float)
    if center is None:
        raw = beta
        b0 = float(beta0)
    else:
        raw = beta / scale
        b0 = float(beta0 - np.dot(raw, center))
    if keep is not None:
        full = np.zeros(n_raw)
        full[np.asarray(keep)] = raw
        raw = full
    return b0, raw


@dataclass
class FitPath:
    alpha: float
    lambdas: np.ndarray
    coefs: np.ndarray  # (T, K+1) raw scale, intercept first
    coefs_std: np.ndarray  # (T, K+1) standardised scale
    train_deviance: np.ndarray
    nnz: np.ndarray
    converged: np.ndarray
    names: list = field(default_factory=list)
    cv: "CVResult | None" = None
    states: list = field(default_factory=list, repr=False)

    @property
    def lambda_opt(self):
        return None if self.cv is None else self.cv.lambda_opt

    @property
    def lambda_1se(self):
        return None if self.cv is None else self.cv.lambda_1se

    def index_of(self, lam):
        return int(np.argmin(np.abs(self.lambdas - lam)))

    def coef_at(self, lam):
        """(beta0, beta) on the raw scale at the path value nearest ``lam``."""
        row = self.coefs[self.index_of(lam)]
        return float(row[0]), row[1:].copy()

    def to_dict(self):
        out = {
            "alpha": float(self.alpha),
            "names": list(self.names),
            "lambdas": [float(v) for v in self.lambdas],
            "coefficients": [[float(v) for v in row] for row in self.coefs],
            "nnz": [int(v) for v in self.nnz],
            "train_deviance": [float(v) for v in self.train_deviance],
            "converged": [bool(v) for v in self.converged],
        }
        if self.cv is not None:
            out.update(self.cv.to_dict())
        return out


@dataclass
class CVResult:
    mean: np.ndarray
    se: np.ndarray
    fold_deviance: np.ndarray  # (folds, T)
    index_opt: int
    index_1se: int
    lambdas: np.ndarray
    folds: np.ndarray  # fold id per quadrature row

    @property
    def lambda_opt(self):
        return float(self.lambdas[self.index_opt])

    @property
    def lambda_1se(self):
        return float(self.lambdas[self.index_1se])

    def to_dict(self):
        return {
            "cv_mean": [float(v) for v in self.mean],
            "cv_se": [float(v) for v in self.se],
            "lambda_opt": self.lambda_opt,
            "lambda_1se": self.lambda_1se,
            "index_opt": int(self.index_opt),
            "index_1se": int(self.index_1se),
        }


def _strong_set(q, Z, state, lam, lam_prev, alpha):
    if lam_prev is None:
        return None
    _, g = _gradient(q, Z, np.clip(state.eta, -ETA_CLAMP, ETA_CLAMP))
    return (np.abs(g) >= alpha * (2.0 * lam - lam_prev)) | (state.beta != 0)


def fit_path(q, Z, alpha, path, center=None, scale=None, keep=None, n_raw=None, names=None, tol=1e-7, max_outer=100, keep_states=False):
    """Warm-started fits down a decreasing lambda sequence.

    ``center``/``scale``/``keep`` describe the standardisation of ``Z`` and
    are used to report coefficients on the raw covariate scale.
    """
    Z = _design(Z, q.m)
    K = Z.shape[1]
    lambdas = np.asarray(path, dtype=float)
    if np.any(np.diff(lambdas) >= 0):
        raise ValueError("lambda path must be strictly decreasing")
    n_raw = K if keep is None else n_raw
    T = len(lambdas)
    coefs = np.zeros((T, n_raw + 1))
    coefs_std = np.zeros((T, K + 1))
    dev = np.zeros(T)
    nnz = np.zeros(T, dtype=int)
    conv = np.zeros(T, dtype=bool)
    states = []
    state = None
    lam_prev = None
    for t, lam in enumerate(lambdas):
        spec = PenaltySpec(alpha, lam)
        screen = _strong_set(q, Z, state, lam, lam_prev, max(alpha, ALPHA_FLOOR)) if state is not None else None
        state = cd_solve(q, Z, spec, warm=state, tol=tol, max_outer=max_outer, screen=screen)
        if not state.converged:
            warnings.warn(f"fit did not converge at lambda={lam:g}", RuntimeWarning, stacklevel=2)
        coefs_std[t, 0] = state.beta0
        coefs_std[t, 1:] = state.beta
        b0, b = back_transform(state.beta0, state.beta, center, scale, keep, n_raw)
        coefs[t, 0] = b0
        coefs[t, 1:] = b
        dev[t] = poisson_deviance(q.weights, q.responses, np.exp(np.clip(state.eta, -ETA_CLAMP, ETA_CLAMP)))
        nnz[t] = state.nnz
        conv[t] = state.converged
        if keep_states:
            states.append(state)
        lam_prev = lam
    if names is None:
        names = [f"z{k + 1}" for k in range(n_raw)]
    return FitPath(alpha, lambdas, coefs, coefs_std, dev, nnz, conv, list(names), None, states)


def make_folds(q, folds=10, seed=0, max_tries=10):
    """Fold id per quadrature row; events and dummies shuffled separately."""
    if folds < 2:
        raise ValueError("need at least 2 folds")
    ev = np.flatnonzero(q.is_event == 1)
    du = np.flatnonzero(q.is_event == 0)
    rng = np.random.default_rng(seed)
    for _ in range(max_tries):
        fid = np.empty(q.m, dtype=int)
        for rows in (ev, du):
            perm = rng.permutation(rows)
            start = int(rng.integers(folds))
            fid[perm] = (start + np.arange(perm.size)) % folds
        if np.all(np.bincount(fid[ev], minlength=folds) > 0):
            return fid
    raise ValueError(f"could not give every one of {folds} folds an event ({ev.size} events)")


def cv_select(q, Z, alpha, path, folds=10, seed=0, threads=1, tol=1e-7, max_outer=100):
    """K-fold cross-validated deviance along ``path``; optimal and one-SE lambdas.

    Rows are split into folds (events and dummies stratified), each fold's
    path is fitted on the others with their original quadrature weights, and
    the held-out Poisson deviance is recorded.
    """
    Z = _design(Z, q.m)
    lambdas = np.asarray(path, dtype=float)
    fid = make_folds(q, folds, seed)

    def one(f):
        train = np.flatnonzero(fid != f)
        test = np.flatnonzero(fid == f)
        qt = q.subset(train)
        fp = fit_path(qt, Z[train], alpha, lambdas, tol=tol, max_outer=max_outer)
        out = np.empty(len(lambdas))
        Zt = Z[test]
        for t in range(len(lambdas)):
            b0 = fp.coefs_std[t, 0]
            b = fp.coefs_std[t, 1:]
            eta = np.clip(_eta(Zt, b0, b), -ETA_CLAMP, ETA_CLAMP)
            out[t] = poisson_deviance(q.weights[test], q.responses[test], np.exp(eta))
        return out

    if threads and threads > 1:
        with ThreadPoolExecutor(max_workers=int(threads)) as ex:
            rows = list(ex.map(one, range(folds)))
    else:
        rows = [one(f) for f in range(folds)]
    fold_dev = np.vstack(rows)
    mean = fold_dev.mean(axis=0)
    se = fold_dev.std(axis=0, ddof=1) / math.sqrt(folds)
    i_opt = int(np.argmin(mean))  # first minimum: the larger lambda on ties
    thresh = mean[i_opt] + se[i_opt]
    i_1se = int(np.flatnonzero(mean <= thresh)[0])
    return CVResult(mean, se, fold_dev, i_opt, i_1se, lambdas, fid)


def predict_intensity(beta0, beta, stack, grid, normalize=False):
    """exp(b0 + z(x) b) at every in-window cell centre of ``grid``.

    ``beta`` is on the raw scale of ``stack``'s unstandardised columns. Cells whose
    covariates are undefined become nodata. ``normalize`` rescales the
    defined cells to [0, 1].
    """
    beta = np.asarray(beta, dtype=float)
    defined = grid.mask.ravel()
    centers = grid.centers()[defined]
    # nearest-cell fill near raster holes; anything unfillable stays NaN
    Zc = stack.raw().eval_raw(centers, fill=True)
    eta = np.full(len(centers), float(beta0))
    if beta.size:
        with np.errstate(invalid="ignore"):
            nz = np.flatnonzero(beta)
            if nz.size:
                eta = eta + Zc[:, nz] @ beta[nz]
    bad = ~np.isfinite(eta)
    eta = clamp_eta(np.where(bad, 0.0, eta))
    vals = np.full(grid.values.size, np.nan)
    out = np.exp(eta)
    out[bad] = np.nan
    vals[defined] = out
    vals = vals.reshape(grid.values.shape)
    if normalize:
        vals = minmax(vals)
    return grid.with_values(vals)


def minmax(values):
    """Rescale finite entries to [0, 1]; a constant field maps to 0."""
    v = np.asarray(values, dtype=float)
    lo, hi = np.nanmin(v), np.nanmax(v)
    if hi > lo:
        return (v - lo) / (hi - lo)
    return np.where(np.isfinite(v), 0.0, np.nan)


@dataclass(frozen=True)
class FitConfig:
    """Settings for the full quadrature, path and cross-validation pipeline."""

    tiles_per_side: int = 100
    alpha: float = 0.95
    n_lambda: int = 100
    ratio: float | None = None
    folds: int = 10
    cv_seed: int = 0
    dummy_mode: str = "systematic"
    dummy_seed: int = 0
    tol: float = 1e-7

    def to_dict(self):
        return {
            "tiles_per_side": int(self.tiles_per_side),
            "alpha": float(self.alpha),
            "n_lambda": int(self.n_lambda),
            "ratio": None if self.ratio is None else float(self.ratio),
            "folds": int(self.folds),
            "cv_seed": int(self.cv_seed),
            "dummy_mode": self.dummy_mode,
            "dummy_seed": int(self.dummy_seed),
            "tol": float(self.tol),
        }


@dataclass
class FittedModel:
    scheme: object
    stack: object  # standardised
    path: FitPath

    def coef(self, which="opt"):
        """Raw-scale (beta0, beta) of the dense ("opt") or sparse ("1se") model."""
        cv = self.path.cv
        t = {"opt": cv.index_opt, "1se": cv.index_1se}[which]
        row = self.path.coefs[t]
        return float(row[0]), row[1:].copy()

    def predict(self, grid, which="opt", normalize=False):
        b0, b = self.coef(which)
        return predict_intensity(b0, b, self.stack, grid, normalize)


def fit_intensity(x, stack, config=FitConfig(), threads=1):
    """Quadrature, standardisation, regularisation path and K-fold CV for ``x``.

    Parameters
    ----------
    x : PointPattern
    stack : CovariateStack
        Unstandardised covariates; standardisation is learned here.
    config : FitConfig
    threads : int
        Worker threads for the CV folds; results do not depend on it.

    Returns
    -------
    FittedModel
    """
    if x.n == 0:
        raise ValueError("cannot fit an intensity to an empty pattern")
    q = build_grid_scheme(x, x.window, config.tiles_per_side, config.dummy_mode, config.dummy_seed)
    raw = stack.raw()
    Z_raw = eval_at(raw, q.points)
    std = standardize(raw, q, Z_raw)
    Z = (Z_raw[:, std.keep] - std.center) / std.scale
    lambdas = lambda_path(q, Z, config.alpha, config.n_lambda, config.ratio)
    fp = fit_path(q, Z, config.alpha, lambdas, std.center, std.scale, std.keep, raw.n_raw, raw.raw_names, config.tol)
    fp.cv = cv_select(q, Z, config.alpha, lambdas, config.folds, config.cv_seed, threads, config.tol)
    return FittedModel(q, std, fp)
