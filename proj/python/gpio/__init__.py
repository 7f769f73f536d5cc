"""Graph Perceiver IO: encodings, metrics, dataset IO and model forward."""

from ._core import (
    ConfigError,
    DatasetError,
    DivergenceError,
    Model,
    ShapeError,
    appnp_smooth,
    average_precision,
    check_dataset,
    compute_rwpe,
    format_double,
    fourier_pe,
    load_portable,
    roc_auc,
    save_portable,
    sgc_smooth,
)

__version__ = "0.1.0"

__all__ = [
    "ConfigError",
    "DatasetError",
    "DivergenceError",
    "Model",
    "ShapeError",
    "appnp_smooth",
    "average_precision",
    "check_dataset",
    "compute_rwpe",
    "format_double",
    "fourier_pe",
    "load_portable",
    "roc_auc",
    "save_portable",
    "sgc_smooth",
]
