"""Edit distance, Euclidean distance and their composite on response strings.

The composite ``(1 + levenshtein) * euclidean`` grows with dissimilarity even
though it is sometimes called a similarity index; it is treated as a
dissimilarity everywhere in this package. It is not a metric (the triangle
inequality can fail).
"""

from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from . import _pykernels
from .kernels import impl
from .survey import Dataset

METRICS = {
    "levenshtein": _pykernels.METRIC_LEVENSHTEIN,
    "euclidean": _pykernels.METRIC_EUCLIDEAN,
    "composite": _pykernels.METRIC_COMPOSITE,
}


def _as_int_sequence(seq):
    try:
        values = [int(v) for v in seq]
    except (TypeError, ValueError):
        return None
    if any(v != s for v, s in zip(values, seq)):
        return None
    return values


def levenshtein(a: Sequence, b: Sequence) -> int:
    """Minimum number of unit-cost insertions, deletions and substitutions."""
    ai, bi = _as_int_sequence(a), _as_int_sequence(b)
    if ai is None or bi is None:
        return _pykernels.levenshtein(a, b)
    return int(impl.levenshtein(ai, bi))


def euclidean(x: Sequence[float], y: Sequence[float]) -> float:
    x = np.asarray(x, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    if x.shape != y.shape:
        raise ValueError(f"dimension mismatch: {x.shape} vs {y.shape}")
    d = x - y
    return math.sqrt(float((d * d).sum()))


def combined_dissimilarity(a: Sequence[int], b: Sequence[int]) -> float:
    """``(1 + levenshtein(a, b)) * euclidean(a, b)``."""
    a = tuple(a)
    b = tuple(b)
    return (1.0 + levenshtein(a, b)) * euclidean(a, b)


@dataclass(frozen=True)
class DissimilarityMatrix:
    values: np.ndarray
    metric_tag: str

    @property
    def n(self) -> int:
        return self.values.shape[0]

    def scaled(self, factor: float) -> "DissimilarityMatrix":
        return DissimilarityMatrix(self.values * factor, self.metric_tag)


def _row_blocks(n, parts):
    # Interleave rows so upper-triangle work is spread evenly over workers.
    return [list(range(p, n, parts)) for p in range(parts)]


def pairwise_matrix(X, metric_tag: str = "composite", threads: int = 1) -> np.ndarray:
    """Dense symmetric matrix of ``metric_tag`` over the rows of integer ``X``."""
    if metric_tag not in METRICS:
        raise ValueError(f"unknown metric {metric_tag!r}; expected one of {sorted(METRICS)}")
    X = np.ascontiguousarray(X, dtype=np.int64)
    n = X.shape[0]
    out = np.zeros((n, n), dtype=np.float64)
    metric = METRICS[metric_tag]
    threads = max(1, int(threads))
    if threads == 1 or n < 64:
        impl.pairwise_dissimilarity(X, metric, 0, n, out)
        return out

    def work(rows):
        for i in rows:
            impl.pairwise_dissimilarity(X, metric, i, i + 1, out)

    with ThreadPoolExecutor(max_workers=threads) as pool:
        list(pool.map(work, _row_blocks(n, threads)))
    return out


def dissimilarity_matrix(
    dataset: Dataset | np.ndarray, metric_tag: str = "composite", threads: int = 1
) -> DissimilarityMatrix:
    X = dataset.likert_matrix if isinstance(dataset, Dataset) else np.asarray(dataset)
    if X.shape[0] == 0:
        raise ValueError("dissimilarity_matrix needs a non-empty dataset")
    return DissimilarityMatrix(pairwise_matrix(X, metric_tag, threads), metric_tag)


def dump_lower_triangle(matrix: DissimilarityMatrix, stream) -> None:
    """Write row i as entries 0..i (diagonal included), shortest round-trip."""
    v = matrix.values
    for i in range(matrix.n):
        stream.write(",".join(repr(float(x)) for x in v[i, : i + 1]) + "\n")


def load_lower_triangle(stream, metric_tag: str) -> DissimilarityMatrix:
    rows = [line.strip() for line in stream if line.strip()]
    n = len(rows)
    out = np.zeros((n, n), dtype=np.float64)
    for i, line in enumerate(rows):
        vals = [float(x) for x in line.split(",")]
        if len(vals) != i + 1:
            raise ValueError(f"row {i} has {len(vals)} entries, expected {i + 1}")
        out[i, : i + 1] = vals
        out[: i + 1, i] = vals
    return DissimilarityMatrix(out, metric_tag)
