"""Cluster-count selection by mean silhouette, plus partition agreement."""

from __future__ import annotations

from dataclasses import dataclass, field, replace
from math import comb
from typing import Iterable

import numpy as np

from .clustering import CLASSIC, ClusterConfig, ClusterModel, kmeans_fit
from .errors import DataError
from .similarity import DissimilarityMatrix, dissimilarity_matrix
from .survey import Dataset


@dataclass(frozen=True)
class SilhouetteResult:
    per_sample: np.ndarray
    per_cluster_mean: np.ndarray
    overall_mean: float
    k: int

    def to_dict(self) -> dict:
        return {
            "k": self.k,
            "overall_mean": self.overall_mean,
            "per_cluster_mean": self.per_cluster_mean.tolist(),
        }


def silhouette(matrix: DissimilarityMatrix | np.ndarray, assignments) -> SilhouetteResult:
    """Per-sample silhouette ``(b - a) / max(a, b)`` from a dissimilarity matrix.

    ``a`` averages over co-members excluding the sample itself, ``b`` is the
    smallest mean dissimilarity to another cluster. Members of singleton
    clusters score 0, as does a sample with ``a == b == 0``.
    """
    D = matrix.values if isinstance(matrix, DissimilarityMatrix) else np.asarray(matrix, dtype=np.float64)
    labels = np.asarray(assignments, dtype=np.int64)
    n = labels.shape[0]
    if D.shape != (n, n):
        raise ValueError("matrix and assignments disagree in size")
    k = int(labels.max()) + 1 if n else 0
    if k < 2:
        raise DataError("silhouette needs at least 2 clusters")
    sizes = np.bincount(labels, minlength=k)
    if (sizes == 0).any():
        raise DataError(f"empty cluster(s): {np.flatnonzero(sizes == 0).tolist()}")

    sums = np.stack([D[:, labels == j].sum(axis=1) for j in range(k)], axis=1)
    rows = np.arange(n)
    own_size = sizes[labels]
    with np.errstate(divide="ignore", invalid="ignore"):
        a = sums[rows, labels] / (own_size - 1)
        means = sums / sizes[None, :]
    means[rows, labels] = np.inf
    b = means.min(axis=1)
    denom = np.maximum(a, b)
    with np.errstate(divide="ignore", invalid="ignore"):
        s = (b - a) / denom
    s[(own_size == 1) | (denom == 0)] = 0.0

    per_cluster = np.array([s[labels == j].mean() for j in range(k)])
    return SilhouetteResult(s, per_cluster, float(s.mean()), k)


def metric_for_mode(metric_mode: str) -> str:
    return "euclidean" if metric_mode == CLASSIC else "composite"


@dataclass(frozen=True)
class KSelection:
    best_k: int
    silhouettes: dict[int, SilhouetteResult]
    models: dict[int, ClusterModel] = field(repr=False)
    metric_tag: str = "euclidean"


def select_k(
    dataset: Dataset | np.ndarray,
    candidate_ks: Iterable[int],
    config: ClusterConfig,
    matrix: DissimilarityMatrix | None = None,
    threads: int = 1,
) -> KSelection:
    """Fit each candidate k with ``config`` (its k replaced) and keep the best.

    Silhouettes use the metric matching the clustering mode (Euclidean for
    classic, composite for medoid). The largest overall mean wins; ties go
    to the smaller k.
    """
    ks = sorted(set(int(k) for k in candidate_ks))
    if not ks:
        raise DataError("no candidate k given")
    X = dataset.likert_matrix if isinstance(dataset, Dataset) else np.asarray(dataset)
    tag = metric_for_mode(config.metric_mode)
    if matrix is None:
        matrix = dissimilarity_matrix(X, tag, threads=threads)
    elif matrix.metric_tag != tag:
        raise ValueError(f"matrix metric {matrix.metric_tag!r} does not match mode (needs {tag!r})")

    silhouettes, models = {}, {}
    best_k, best_score = None, -np.inf
    for k in ks:
        model = kmeans_fit(X, replace(config, k=k), matrix=matrix if tag == "composite" else None)
        result = silhouette(matrix, model.assignments)
        silhouettes[k] = result
        models[k] = model
        if result.overall_mean > best_score:
            best_k, best_score = k, result.overall_mean
    return KSelection(best_k, silhouettes, models, tag)


def adjusted_rand_index(labels_a, labels_b) -> float:
    """Chance-corrected pair agreement of two partitions (1 = identical)."""
    a = np.unique(np.asarray(labels_a), return_inverse=True)[1]
    b = np.unique(np.asarray(labels_b), return_inverse=True)[1]
    if a.shape != b.shape:
        raise ValueError("label arrays differ in length")
    n = a.shape[0]
    table = np.zeros((a.max() + 1, b.max() + 1), dtype=np.int64)
    np.add.at(table, (a, b), 1)
    index = sum(comb(int(v), 2) for v in table.ravel())
    rows = sum(comb(int(v), 2) for v in table.sum(axis=1))
    cols = sum(comb(int(v), 2) for v in table.sum(axis=0))
    total = comb(n, 2)
    if total == 0:
        return 1.0
    expected = rows * cols / total
    max_index = (rows + cols) / 2
    if max_index == expected:
        return 1.0
    return float((index - expected) / (max_index - expected))
