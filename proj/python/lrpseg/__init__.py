"""Weakly supervised damage segmentation from layer-wise relevance propagation."""

from ._lrpseg import (
    ConfigError,
    DataError,
    Error,
    FormatError,
    Network,
    ShapeError,
    beta_cdf,
    beta_pdf,
    confusion,
    fit_bmm,
    fit_gmm,
    generate_scene,
    isodata_threshold,
    mean_filter_5x5,
    pr_curve,
    segment,
    train_toy,
    write_dataset,
)

__all__ = [
    "ConfigError",
    "DataError",
    "Error",
    "FormatError",
    "Network",
    "ShapeError",
    "beta_cdf",
    "beta_pdf",
    "confusion",
    "fit_bmm",
    "fit_gmm",
    "generate_scene",
    "isodata_threshold",
    "mean_filter_5x5",
    "pr_curve",
    "segment",
    "train_toy",
    "write_dataset",
]
