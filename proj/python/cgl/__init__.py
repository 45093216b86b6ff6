# Copyright 2026 The cgl Authors
# SPDX-License-Identifier: Apache-2.0
"""Composed image retrieval with a graph-convolutional training stream."""

from ._core import (
    Dataset,
    DimensionError,
    Graph,
    NumericalError,
    UsageError,
    ValidationError,
    build_graph,
    choose_tau,
    correlations,
    dml_loss,
    evaluate,
    evaluate_features,
    generate_dataset,
    gradcheck,
    read_dataset,
    read_graph,
    reweight,
    train,
)

__all__ = [
    "Dataset",
    "DimensionError",
    "Graph",
    "NumericalError",
    "UsageError",
    "ValidationError",
    "build_graph",
    "choose_tau",
    "correlations",
    "dml_loss",
    "evaluate",
    "evaluate_features",
    "generate_dataset",
    "gradcheck",
    "read_dataset",
    "read_graph",
    "reweight",
    "train",
]
