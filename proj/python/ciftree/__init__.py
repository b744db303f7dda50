"""Competing-risks CIF forests."""

from ._core import (
    EstimationError,
    Forest,
    ValidationError,
    event_quantiles,
    fit,
    impute,
    mse_vs_truth,
    oracle_cif,
    partial_dependence,
    simulate,
    tune,
)

__all__ = [
    "EstimationError",
    "Forest",
    "ValidationError",
    "event_quantiles",
    "fit",
    "impute",
    "mse_vs_truth",
    "oracle_cif",
    "partial_dependence",
    "simulate",
    "tune",
]
