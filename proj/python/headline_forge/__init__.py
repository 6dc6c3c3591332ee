"""Headline quality labeling and scoring."""

from ._core import (
    HeadlineForgeError,
    Scorer,
    indicator_distribution,
    ingest,
    label,
    mae,
    normalize,
    rae,
    tokenize,
    train,
    write_synthetic,
)

__all__ = [
    "HeadlineForgeError",
    "Scorer",
    "indicator_distribution",
    "ingest",
    "label",
    "mae",
    "normalize",
    "rae",
    "tokenize",
    "train",
    "write_synthetic",
]
