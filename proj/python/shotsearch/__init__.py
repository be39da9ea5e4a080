"""Python access to the shot-search core: ingest, build, query and evaluate."""

from ._core import (
    Archive,
    HyperplaneEncoder,
    ShotsearchError,
    average_precision,
    build,
    evaluate,
    hamming,
    ingest,
    levenshtein,
    mean_ap,
    normalize_text,
)

__all__ = [
    "Archive",
    "HyperplaneEncoder",
    "ShotsearchError",
    "average_precision",
    "build",
    "evaluate",
    "hamming",
    "ingest",
    "levenshtein",
    "mean_ap",
    "normalize_text",
]
