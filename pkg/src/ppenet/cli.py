"""Command-line front end.

Subcommands: fit, bandwidth, covariates, simulate, eval, split. Settings come
from an optional ``key = value`` config file, overridden by flags. Exit codes:
2 for unreadable or invalid input, 3 for numerical failure, 4 for
conflicting settings.
"""

from __future__ import annotations

import argparse
import configparser
import csv
import json
import os
import sys
import warnings
from dataclasses import asdict, dataclass, fields
from pathlib import Path

import numpy as np

from . import __version__
from . import io as pio
from .bandwidth import select_bandwidth, segment_length_bandwidth
from .covariates import (
    CoordinateCovariate,
    CovariateStack,
    ManifestError,
    NodataError,
    RasterCovariate,
    benchmark_covariate,
    build_from_manifest,
    expand_interactions,
)
from .geom import InvalidWindowError, PointPattern, Window, rasterize
from .penfit import FitConfig, FitDivergedError, fit_intensity, minmax
from .quadrature import clamp_eta
from .sim_eval import simulate_poisson, split_train_test, stability_eval
from .smoothing import interpolate_intensity

SEED_ENV = "PPENET_SEED"
EXIT_INPUT, EXIT_NUMERIC, EXIT_CONFLICT = 2, 3, 4


class InputError(Exception):
    pass


class ConfigConflict(Exception):
    pass


@dataclass
class RunConfig:
    pattern: str | None = None
    window: str | None = None
    manifest: str | None = None
    segments: str | None = None
    out: str | None = None
    tiles_per_side: int = 100
    dummy_mode: str = "systematic"
    alpha: float = 0.95
    n_lambda: int = 100
    ratio: float | None = None
    folds: int = 10
    seed: int = 0
    cv_seed: int | None = None
    mark: str | None = None
    interactions: bool = False
    squares: bool = False
    benchmark: bool = False
    normalize: bool = False
    interpolate: bool = False
    interp_bandwidth: float | None = None
    cell: float | None = None
    k_max: int = 30
    replicates: int = 100
    fraction: float = 0.7
    model: str = "opt"
    raw: bool = False
    rho_const: float | None = None
    rho_raster: str | None = None

    def record(self):
        """Resolved settings as written into outputs (destination excluded)."""
        d = asdict(self)
        d.pop("out")
        return d

    def fit_config(self):
        return FitConfig(
            tiles_per_side=self.tiles_per_side,
            alpha=self.alpha,
            n_lambda=self.n_lambda,
            ratio=self.ratio,
            folds=self.folds,
            cv_seed=self.seed if self.cv_seed is None else self.cv_seed,
            dummy_mode=self.dummy_mode,
            dummy_seed=self.seed,
        )


_TYPES = {f.name: f.type for f in fields(RunConfig)}


def _convert(key, value):
    kind = _TYPES[key]
    text = str(value).strip().strip('"').strip("'")
    if text.lower() in ("none", "") and "None" in kind:
        return None
    try:
        if kind.startswith("bool"):
            low = text.lower()
            if low in ("true", "yes", "on", "1"):
                return True
            if low in ("false", "no", "off", "0"):
                return False
            raise ValueError(text)
        if kind.startswith("int"):
            return int(text)
        if kind.startswith("float"):
            return float(text)
    except ValueError:
        raise InputError(f"bad value {value!r} for {key}") from None
    return text


def read_config(path):
    """Parse a ``key = value`` file (``#`` comments) into RunConfig fields."""
    parser = configparser.ConfigParser(interpolation=None, inline_comment_prefixes=("#",))
    try:
        parser.read_string("[run]\n" + Path(path).read_text(encoding="utf-8"))
    except (OSError, configparser.Error) as err:
        raise InputError(f"cannot read config {path}: {err}") from None
    out = {}
    for key, value in parser["run"].items():
        name = key.replace("-", "_")
        if name not in _TYPES:
            raise InputError(f"unknown config key {key!r}")
        out[name] = _convert(name, value)
    # relative paths in the config are relative to the config file
    base = Path(path).parent
    for k in ("pattern", "window", "manifest", "segments", "rho_raster"):
        if out.get(k) and not Path(out[k]).is_absolute():
            out[k] = str(base / out[k])
    return out


def resolve(args):
    """Defaults, then the config file, then flags."""
    cfg = RunConfig()
    env = os.environ.get(SEED_ENV)
    if env is not None:
        cfg.seed = _convert("seed", env)
    if getattr(args, "config", None):
        for k, v in read_config(args.config).items():
            setattr(cfg, k, v)
    for k in _TYPES:
        v = getattr(args, k, None)
        if v is not None:
            setattr(cfg, k, v)
    if cfg.squares and not cfg.interactions:
        raise ConfigConflict("squares requires interactions")
    if cfg.model not in ("opt", "1se"):
        raise ConfigConflict(f"model must be 'opt' or '1se', got {cfg.model!r}")
    if cfg.rho_const is not None and cfg.rho_raster is not None:
        raise ConfigConflict("give either rho_const or rho_raster, not both")
    return cfg


def _need(cfg, *keys):
    missing = [k for k in keys if getattr(cfg, k) is None]
    if missing:
        raise InputError(f"missing required setting(s): {', '.join(missing)}")


def _header(cfg, command):
    return {"tool": "ppenet", "version": __version__, "command": command, "config": cfg.record()}


def _dump(path, doc):
    Path(path).write_text(json.dumps(doc, indent=2, sort_keys=True, allow_nan=False) + "\n", encoding="utf-8")


def _sidecar(path, cfg, command):
    """ASCII grids and CSV tables cannot hold metadata; record it alongside."""
    _dump(str(path) + ".json", _header(cfg, command))


def _load_window(cfg):
    if cfg.window is None:
        return Window.rectangle(0.0, 0.0, 1.0, 1.0)
    return pio.read_window(cfg.window)


def _load_pattern(cfg):
    _need(cfg, "pattern")
    w = _load_window(cfg)
    column, label = "mark", None
    if cfg.mark is not None:
        column, sep, label = cfg.mark.partition("=")
        if not sep:
            column, label = "mark", cfg.mark
    try:
        x = pio.read_points(cfg.pattern, w, mark_column=column.strip())
    except pio.FormatError:
        raise
    except ValueError as err:
        raise InputError(f"{cfg.pattern}: {err}") from None
    if label is not None:
        if x.marks is None:
            raise ConfigConflict(f"mark filter {cfg.mark!r} but {cfg.pattern} has no column {column!r}")
        x = x.select_mark(label.strip())
    else:
        x = x.unmarked()
    return x, w


def _grid(cfg, w):
    xmin, ymin, xmax, ymax = w.bbox
    cell = cfg.cell if cfg.cell is not None else max(xmax - xmin, ymax - ymin) / 100
    return rasterize(w, cell)


def _stack(cfg, x, w, grid):
    if cfg.manifest:
        stack = build_from_manifest(cfg.manifest, w, grid, x, cfg.seed)
    else:
        stack = CovariateStack(("x", "y"), (CoordinateCovariate("x"), CoordinateCovariate("y")))
    if cfg.benchmark and "benchmark" not in stack.names:
        r = benchmark_covariate(x, w, grid, cfg.seed, cfg.k_max)
        meta = dict(stack.meta, benchmark={"bandwidth": r.meta["bandwidth"], "P0": r.meta["P0"]})
        stack = CovariateStack(stack.names + ("benchmark",), stack.sources + (RasterCovariate(r),), meta=meta)
    if cfg.interactions:
        stack = expand_interactions(stack, cfg.squares)
    return stack


def _floats(a):
    return [float(v) for v in a]


def cmd_fit(cfg, threads=1):
    x, w = _load_pattern(cfg)
    _need(cfg, "out")
    grid = _grid(cfg, w)
    stack = _stack(cfg, x, w, grid)
    model = fit_intensity(x, stack, cfg.fit_config(), threads)
    out = Path(cfg.out)
    out.mkdir(parents=True, exist_ok=True)
    fp = model.path
    names = stack.raw_names
    doc = _header(cfg, "fit")
    doc["n_events"] = int(x.n)
    doc["scheme"] = model.scheme.metadata()
    doc["covariates"] = {
        "names": names,
        "kept": model.stack.column_names,
        "center": _floats(model.stack.center),
        "scale": _floats(model.stack.scale),
        "sources": stack.meta,
    }
    doc["path"] = fp.to_dict()
    # lambdas are comparable only between fits with the same number of quadrature points
    doc["path"]["loss_scaling"] = {"divisor": "m", "m": int(model.scheme.m)}
    doc["path"]["cv_criterion"] = "held-out Poisson deviance over quadrature rows, events and dummies stratified"
    coefs = {}
    for label, which in (("dense", "opt"), ("sparse", "1se")):
        b0, b = model.coef(which)
        lam = fp.lambda_opt if which == "opt" else fp.lambda_1se
        coefs[label] = (b0, b)
        doc[label] = {
            "lambda": float(lam),
            "intercept": b0,
            "coefficients": dict(zip(names, _floats(b))),
            "nnz": int(np.count_nonzero(b)),
        }
        r = model.predict(grid, which, cfg.normalize)
        pio.write_ascii_grid(out / f"intensity_{label}.asc", r)
        _sidecar(out / f"intensity_{label}.asc", cfg, "fit")
    with open(out / "coefficients.csv", "w", newline="", encoding="utf-8") as fh:
        wr = csv.writer(fh, lineterminator="\n")
        wr.writerow(["term", "dense", "sparse"])
        wr.writerow(["(intercept)", repr(coefs["dense"][0]), repr(coefs["sparse"][0])])
        for k, name in enumerate(names):
            wr.writerow([name, repr(float(coefs["dense"][1][k])), repr(float(coefs["sparse"][1][k]))])
    _sidecar(out / "coefficients.csv", cfg, "fit")
    if cfg.interpolate:
        doc["interpolation"] = _interpolate(cfg, x, w, stack, grid, coefs, out)
    _dump(out / "fit.json", doc)
    return doc


def _interpolation_bandwidth(cfg, x, stack):
    if cfg.interp_bandwidth is not None:
        return float(cfg.interp_bandwidth), "flag"
    bench = stack.meta.get("benchmark", {})
    if "bandwidth" in bench:
        return float(bench["bandwidth"]), "benchmark"
    return float(select_bandwidth(x.points, min(cfg.k_max, x.n - 1), cfg.seed).h), "selected"


def _interpolate(cfg, x, w, stack, grid, coefs, out):
    """Kernel-smooth the fitted intensity at the events onto the grid."""
    h, source = _interpolation_bandwidth(cfg, x, stack)
    Zx = stack.raw().eval_raw(x.points, fill=True)
    ok = np.all(np.isfinite(Zx), axis=1)
    for label, (b0, b) in coefs.items():
        marks = np.exp(clamp_eta(b0 + Zx[ok] @ b))
        r = interpolate_intensity(PointPattern(x.points[ok], w, marks), w, h, grid)
        if cfg.normalize:
            r = r.with_values(minmax(r.values))
        pio.write_ascii_grid(out / f"interpolated_{label}.asc", r)
        _sidecar(out / f"interpolated_{label}.asc", cfg, "fit")
    return {"bandwidth": h, "bandwidth_source": source, "events_used": int(ok.sum())}


def cmd_bandwidth(cfg):
    if cfg.segments:
        report = segment_length_bandwidth(pio.read_segments(cfg.segments), cfg.k_max, cfg.seed)
        mode = "segment-lengths"
    else:
        x, _ = _load_pattern(cfg)
        report = select_bandwidth(x.points, cfg.k_max, cfg.seed)
        mode = "points"
    doc = _header(cfg, "bandwidth")
    doc["mode"] = mode
    doc.update(report.to_dict())
    if cfg.out:
        Path(cfg.out).parent.mkdir(parents=True, exist_ok=True)
        _dump(cfg.out, doc)
    else:
        sys.stdout.write(json.dumps(doc, indent=2, sort_keys=True) + "\n")
    return doc


def cmd_covariates(cfg):
    _need(cfg, "manifest", "out")
    w = _load_window(cfg)
    grid = _grid(cfg, w)
    x = _load_pattern(cfg)[0] if cfg.pattern else None
    stack = build_from_manifest(cfg.manifest, w, grid, x, cfg.seed)
    out = Path(cfg.out)
    out.mkdir(parents=True, exist_ok=True)
    files = {}
    for name, src in zip(stack.names, stack.sources):
        fname = f"{name}.asc"
        pio.write_ascii_grid(out / fname, src.to_raster(grid))
        _sidecar(out / fname, cfg, "covariates")
        files[name] = fname
    doc = _header(cfg, "covariates")
    doc["rasters"] = files
    doc["sources"] = stack.meta
    _dump(out / "covariates.json", doc)
    return doc


def cmd_simulate(cfg):
    _need(cfg, "out")
    w = _load_window(cfg)
    if cfg.rho_raster is not None:
        rho = pio.read_ascii_grid(cfg.rho_raster)
    elif cfg.rho_const is not None:
        rho = cfg.rho_const
    else:
        raise InputError("simulate needs rho_const or rho_raster")
    x = simulate_poisson(rho, w, cfg.seed)
    Path(cfg.out).parent.mkdir(parents=True, exist_ok=True)
    pio.write_points(cfg.out, x)
    _sidecar(cfg.out, cfg, "simulate")
    return {"n": int(x.n)}


def cmd_eval(cfg, threads=1):
    x, w = _load_pattern(cfg)
    _need(cfg, "out")
    if not 0 < cfg.fraction <= 1:
        raise ConfigConflict("fraction must lie in (0, 1]")
    grid = _grid(cfg, w)
    stack = _stack(cfg, x, w, grid)
    report = stability_eval(
        x, stack, cfg.fit_config(), cfg.replicates, cfg.fraction, cfg.seed, grid, cfg.model, not cfg.raw, threads
    )
    report.write(cfg.out, extra=_header(cfg, "eval"))
    for name in ("mae", "q05", "q95", "profile"):
        ext = "csv" if name == "profile" else "asc"
        _sidecar(Path(cfg.out) / f"stability_{name}.{ext}", cfg, "eval")
    return report.to_dict()


def cmd_split(cfg):
    x, _ = _load_pattern(cfg)
    _need(cfg, "out")
    if not 0 < cfg.fraction < 1:
        raise ConfigConflict("split fraction must lie in (0, 1)")
    train, test = split_train_test(x, cfg.fraction, cfg.seed)
    out = Path(cfg.out)
    out.mkdir(parents=True, exist_ok=True)
    for name, p in (("train", train), ("test", test)):
        pio.write_points(out / f"{name}.csv", p)
        _sidecar(out / f"{name}.csv", cfg, "split")
    return {"train": int(train.n), "test": int(test.n)}


def _bool_flag(p, name, help):
    p.add_argument(f"--{name}", dest=name.replace("-", "_"), action=argparse.BooleanOptionalAction, default=None, help=help)


def build_parser():
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="key = value settings file; flags override it")
    common.add_argument("--seed", type=int, help=f"master seed (default ${SEED_ENV} or 0)")
    common.add_argument("--window", help="window vertex CSV (x,y); default unit square")
    common.add_argument("--out", help="output file or directory")
    common.add_argument("--threads", type=int, default=1, help="worker threads; results do not depend on it")

    pattern = argparse.ArgumentParser(add_help=False)
    pattern.add_argument("--pattern", help="event CSV (x,y[,mark])")
    pattern.add_argument("--mark", help="keep events whose mark matches, e.g. 'priority=1'")

    model = argparse.ArgumentParser(add_help=False)
    model.add_argument("--manifest", help="covariate manifest JSON")
    model.add_argument("--tiles", dest="tiles_per_side", type=int, help="quadrature tiles per side")
    model.add_argument("--dummy-mode", choices=("systematic", "random"))
    model.add_argument("--alpha", type=float)
    model.add_argument("--n-lambda", type=int)
    model.add_argument("--ratio", type=float)
    model.add_argument("--folds", type=int)
    model.add_argument("--cv-seed", type=int)
    model.add_argument("--cell", type=float, help="prediction raster cell size")
    model.add_argument("--kmax", dest="k_max", type=int, help="largest cluster count for the benchmark bandwidth")
    _bool_flag(model, "interactions", "add pairwise products")
    _bool_flag(model, "squares", "with --interactions, add squares too")
    _bool_flag(model, "benchmark", "add the kernel-intensity benchmark covariate")
    _bool_flag(model, "normalize", "rescale predicted rasters to [0, 1]")
    _bool_flag(model, "interpolate", "also kernel-interpolate the fitted intensity at the events")
    model.add_argument("--interp-bandwidth", type=float, help="interpolation bandwidth (default: benchmark bandwidth)")

    parser = argparse.ArgumentParser(prog="ppenet", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=f"ppenet {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    sub.add_parser("fit", parents=[common, pattern, model], help="fit the regularised intensity model")

    p = sub.add_parser("bandwidth", parents=[common, pattern], help="K-means/KL-index kernel bandwidth")
    p.add_argument("--kmax", dest="k_max", type=int)
    p.add_argument("--segments", help="segment CSV: select from segment lengths instead")

    p = sub.add_parser("covariates", parents=[common, pattern], help="rasterise every manifest covariate")
    p.add_argument("--manifest")
    p.add_argument("--cell", type=float)

    p = sub.add_parser("simulate", parents=[common], help="simulate a Poisson pattern")
    p.add_argument("--rho-const", type=float)
    p.add_argument("--rho-raster", help="intensity ASCII grid")

    p = sub.add_parser("eval", parents=[common, pattern, model], help="undersampling stability evaluation")
    p.add_argument("--replicates", type=int)
    p.add_argument("--fraction", type=float)
    p.add_argument("--model", choices=("opt", "1se"), help="dense (opt) or sparse (1se) model")
    _bool_flag(p, "raw", "compare raw intensities instead of [0, 1]-rescaled ones")

    p = sub.add_parser("split", parents=[common, pattern], help="train/test split of a pattern")
    p.add_argument("--fraction", type=float)
    return parser


COMMANDS = {
    "fit": lambda cfg, t: cmd_fit(cfg, t),
    "bandwidth": lambda cfg, t: cmd_bandwidth(cfg),
    "covariates": lambda cfg, t: cmd_covariates(cfg),
    "simulate": lambda cfg, t: cmd_simulate(cfg),
    "eval": lambda cfg, t: cmd_eval(cfg, t),
    "split": lambda cfg, t: cmd_split(cfg),
}


def main(argv=None):
    args = build_parser().parse_args(argv)
    try:
        cfg = resolve(args)
        with warnings.catch_warnings():
            warnings.simplefilter("default")
            COMMANDS[args.command](cfg, max(1, args.threads))
    except ConfigConflict as err:
        print(f"ppenet: config conflict: {err}", file=sys.stderr)
        return EXIT_CONFLICT
    except (InputError, pio.FormatError, InvalidWindowError, ManifestError, NodataError, OSError) as err:
        print(f"ppenet: input error: {err}", file=sys.stderr)
        return EXIT_INPUT
    except (FitDivergedError, FloatingPointError, np.linalg.LinAlgError, ValueError, RuntimeError) as err:
        print(f"ppenet: numerical failure: {err}", file=sys.stderr)
        return EXIT_NUMERIC
    return 0


if __name__ == "__main__":
    sys.exit(main())
