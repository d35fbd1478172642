"""Embedded topics in a stochastic block model."""

from ._core import (
    DataError,
    ElboRecord,
    FitResult,
    NumericError,
    TextGraph,
    ari,
    edge_topic_labels,
    fit,
    load_dataset,
    load_fit,
    run_checks,
    save_dataset,
    select,
    simulate,
    top_words,
)

__all__ = [
    "DataError",
    "ElboRecord",
    "FitResult",
    "NumericError",
    "TextGraph",
    "ari",
    "edge_topic_labels",
    "fit",
    "load_dataset",
    "load_fit",
    "run_checks",
    "save_dataset",
    "select",
    "simulate",
    "top_words",
]
