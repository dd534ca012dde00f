"""Python bindings for the msgc traffic forecaster.

Configurations are plain dicts with the same keys as the JSON config files.
"""

import json

from . import _core
from ._core import (
    ContractError,
    DataError,
    DatasetTooSmallError,
    DimensionError,
    Error,
    IndexError,
    NumericError,
    Predictor,
    Run,
    UsageError,
    adjacent_trend_scores,
    build_adjacency,
    compute_metrics,
    normalized_matrix,
    reachability_score,
    reachability_stack,
    synthesize,
    write_synthetic,
)

__all__ = [
    "ContractError",
    "DataError",
    "DatasetTooSmallError",
    "DimensionError",
    "Error",
    "IndexError",
    "NumericError",
    "Predictor",
    "Run",
    "UsageError",
    "adjacent_trend_scores",
    "build_adjacency",
    "compute_metrics",
    "default_config",
    "evaluate",
    "load_checkpoint",
    "normalized_matrix",
    "reachability_score",
    "reachability_stack",
    "synthesize",
    "train",
    "validate_config",
    "write_synthetic",
]


def default_config():
    return json.loads(_core.default_config())


def validate_config(config):
    """List of violated constraints; empty when the config is usable."""
    return _core.validate_config(json.dumps(config))


def train(readings, nodes, distances, config=None, travel_time=""):
    """Trains on the given files and returns a Run holding the best model."""
    return _core.train(str(readings), str(nodes), str(distances), json.dumps(config or {}), str(travel_time))


def evaluate(run, split="test"):
    """Model and HA metrics of a Run on a split, as a dict."""
    return json.loads(run.evaluate_json(split))


def load_checkpoint(path):
    return Predictor(str(path))
