"""Elastic-net regularised Poisson point-process intensity estimation."""

from .bandwidth import BandwidthReport, kl_index, kmeans, select_bandwidth, segment_length_bandwidth
from .covariates import (
    CoordinateCovariate,
    CovariateStack,
    DistanceCovariate,
    FunctionCovariate,
    RasterCovariate,
    ZoneCovariate,
    benchmark_covariate,
    build_from_manifest,
    eval_at,
    expand_interactions,
    standardize,
)
from .geom import InvalidWindowError, PointPattern, Raster, SegmentPattern, Window, area, contains, rasterize
from .penfit import (
    FitConfig,
    FitPath,
    FittedModel,
    PenaltySpec,
    cd_solve,
    cv_select,
    fit_intensity,
    fit_path,
    kkt_violations,
    lambda_max,
    lambda_path,
    predict_intensity,
)
from .quadrature import QuadratureScheme, build_grid_scheme, deviance, loglik
from .sim_eval import StabilityReport, simulate_poisson, split_train_test, stability_eval, undersample
from .smoothing import KernelSpec, distance_raster, interpolate_intensity, kernel_intensity, segment_density

__version__ = "0.1.0"

__all__ = [
    "BandwidthReport",
    "kl_index",
    "kmeans",
    "select_bandwidth",
    "segment_length_bandwidth",
    "CoordinateCovariate",
    "CovariateStack",
    "DistanceCovariate",
    "FunctionCovariate",
    "RasterCovariate",
    "ZoneCovariate",
    "benchmark_covariate",
    "build_from_manifest",
    "eval_at",
    "expand_interactions",
    "standardize",
    "InvalidWindowError",
    "PointPattern",
    "Raster",
    "SegmentPattern",
    "Window",
    "area",
    "contains",
    "rasterize",
    "FitConfig",
    "FitPath",
    "FittedModel",
    "PenaltySpec",
    "cd_solve",
    "cv_select",
    "fit_intensity",
    "fit_path",
    "kkt_violations",
    "lambda_max",
    "lambda_path",
    "predict_intensity",
    "QuadratureScheme",
    "build_grid_scheme",
    "deviance",
    "loglik",
    "StabilityReport",
    "simulate_poisson",
    "split_train_test",
    "stability_eval",
    "undersample",
    "KernelSpec",
    "distance_raster",
    "interpolate_intensity",
    "kernel_intensity",
    "segment_density",
]
