"""Evolutionary architecture search: genome decoding, surrogate search and segmentation metrics."""

import json

from . import _evonas
from ._evonas import (
    CheckpointError,
    Error,
    PoolFailure,
    ValidationError,
    auroc,
    canonicalize,
    connectivity,
    focal_loss,
    genome_length,
    metrics,
    onemax,
    parameter_count,
)

__all__ = [
    "CheckpointError",
    "Error",
    "PoolFailure",
    "ValidationError",
    "auroc",
    "canonicalize",
    "connectivity",
    "describe",
    "focal_loss",
    "genome_length",
    "metrics",
    "onemax",
    "parameter_count",
    "search",
]


def describe(genome, **kwargs):
    """Architecture description of a genome as a dict (genome is canonicalized first)."""
    return json.loads(_evonas.describe(genome, **kwargs))


def search(config=None, evaluator="onemax"):
    """Run an in-process search against a surrogate fitness.

    config holds evolution settings (mu_schedule, stage_lengths, seed, ...).
    Returns best_genome, best_fitness, history (list of dicts), requests, cache_hits.
    """
    result = _evonas.search(json.dumps(config or {}), evaluator)
    result["history"] = [json.loads(line) for line in result["history"]]
    return result
