"""K-means over Likert response vectors.

Two modes share one driver:

* ``classic_euclidean`` -- squared Euclidean assignment, arithmetic-mean
  centroids (plain Lloyd iterations).
* ``composite_medoid`` -- assignment by the edit-distance/Euclidean composite,
  centroids restricted to records (medoids), since a mean vector has no
  meaningful edit distance.

Iteration stops when assignments repeat. A cluster that empties is refilled
with the record farthest from its own centroid.
"""

from __future__ import annotations

import warnings
from dataclasses import asdict, dataclass, replace
from typing import Sequence

import numpy as np

from .errors import ConfigError, DataError, LikertMineError
from .similarity import DissimilarityMatrix, combined_dissimilarity, dissimilarity_matrix
from .survey import Dataset

CLASSIC = "classic_euclidean"
MEDOID = "composite_medoid"
METRIC_MODES = (CLASSIC, MEDOID)
INITS = ("random_points", "kmeans_pp")

LOW_IS_STRONG = "low_is_strong"
HIGH_IS_STRONG = "high_is_strong"
POLARITIES = (LOW_IS_STRONG, HIGH_IS_STRONG)

STRONG, NEUTRAL, NOT_STRONG = "Strong", "Neutral", "NotStrong"
# Survey coding of the willingness variable, used as the forest target.
WILL_CODES = {STRONG: 1, NEUTRAL: 2, NOT_STRONG: 3}


class EmptyClusterError(LikertMineError):
    def __init__(self, clusters):
        super().__init__(f"empty cluster(s): {list(clusters)}")
        self.clusters = list(clusters)


@dataclass(frozen=True)
class ClusterConfig:
    k: int
    metric_mode: str = CLASSIC
    seed: int = 0
    max_iter: int = 300
    init: str = "random_points"
    n_init: int = 10

    def __post_init__(self):
        if int(self.k) < 1:
            raise ConfigError(f"k must be >= 1, got {self.k}")
        if self.metric_mode not in METRIC_MODES:
            raise ConfigError(f"metric_mode must be one of {METRIC_MODES}")
        if self.init not in INITS:
            raise ConfigError(f"init must be one of {INITS}")
        if int(self.max_iter) < 1:
            raise ConfigError("max_iter must be positive")
        if int(self.n_init) < 1:
            raise ConfigError("n_init must be positive")
        if not 0 <= int(self.seed) < 2**64:
            raise ConfigError("seed must be an unsigned 64-bit integer")


@dataclass(frozen=True)
class ClusterModel:
    config: ClusterConfig
    centroids: np.ndarray  # (k, 15) means, or (k,) record indices in medoid mode
    profiles: np.ndarray  # (k, 15) centroid vectors in both modes
    assignments: np.ndarray
    objective: float
    iterations: int
    converged: bool
    objective_history: tuple[float, ...] = ()
    labels: dict[int, str] | None = None
    label_warning: str | None = None

    @property
    def k(self) -> int:
        return self.config.k

    @property
    def sizes(self) -> list[int]:
        return np.bincount(self.assignments, minlength=self.k).tolist()

    def will_codes(self) -> np.ndarray:
        """Per-record willingness code (1 strong .. 3 not strong).

        Falls back to ``cluster index + 1`` when clusters are unlabeled.
        """
        if self.labels is None:
            return self.assignments + 1
        lut = np.array([WILL_CODES[self.labels[j]] for j in range(self.k)])
        return lut[self.assignments]

    def to_dict(self) -> dict:
        return {
            "config": asdict(self.config),
            "centroids": self.centroids.tolist(),
            "profiles": self.profiles.tolist(),
            "assignments": self.assignments.tolist(),
            "objective": float(self.objective),
            "objective_history": [float(v) for v in self.objective_history],
            "iterations": int(self.iterations),
            "converged": bool(self.converged),
            "labels": None
            if self.labels is None
            else {str(j): name for j, name in sorted(self.labels.items())},
            "label_warning": self.label_warning,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "ClusterModel":
        config = ClusterConfig(**d["config"])
        dtype = np.int64 if config.metric_mode == MEDOID else np.float64
        labels = d.get("labels")
        return cls(
            config=config,
            centroids=np.asarray(d["centroids"], dtype=dtype),
            profiles=np.asarray(d["profiles"], dtype=np.float64),
            assignments=np.asarray(d["assignments"], dtype=np.int64),
            objective=float(d["objective"]),
            iterations=int(d["iterations"]),
            converged=bool(d["converged"]),
            objective_history=tuple(d.get("objective_history", ())),
            labels=None if labels is None else {int(j): v for j, v in labels.items()},
            label_warning=d.get("label_warning"),
        )


def _vectors(data) -> np.ndarray:
    if isinstance(data, Dataset):
        return data.likert_matrix
    return np.asarray(data)


def assign(point: Sequence[int], centroids, metric_mode: str = CLASSIC) -> int:
    """Index of the nearest centroid vector; ties go to the lowest index.

    Classic mode compares squared Euclidean distances, medoid mode the
    composite dissimilarity to each medoid's response vector.
    """
    centroids = np.atleast_2d(np.asarray(centroids, dtype=np.float64))
    if centroids.shape[0] == 0:
        raise ValueError("assign needs at least one centroid")
    if metric_mode == CLASSIC:
        diff = centroids - np.asarray(point, dtype=np.float64)
        d = (diff * diff).sum(axis=1)
    elif metric_mode == MEDOID:
        d = np.array([combined_dissimilarity(point, c.astype(int)) for c in centroids])
    else:
        raise ConfigError(f"unknown metric mode {metric_mode!r}")
    return int(np.argmin(d))


def _check_nonempty(assignments, k):
    sizes = np.bincount(assignments, minlength=k)
    empty = np.flatnonzero(sizes[:k] == 0)
    if empty.size:
        raise EmptyClusterError(empty.tolist())


def _medoids(matrix: np.ndarray, assignments: np.ndarray, k: int) -> np.ndarray:
    out = np.empty(k, dtype=np.int64)
    for j in range(k):
        members = np.flatnonzero(assignments == j)
        cost = matrix[np.ix_(members, members)].sum(axis=1)
        out[j] = members[int(np.argmin(cost))]
    return out


def update_centroids(data, assignments, metric_mode: str = CLASSIC, k: int | None = None, matrix=None):
    """Recompute cluster representatives from an assignment.

    Classic mode returns a (k, d) array of member means. Medoid mode returns
    the record index minimizing summed composite dissimilarity to its
    co-members (lowest index on ties). Raises ``EmptyClusterError`` if some
    cluster in ``0..k-1`` has no members.
    """
    X = _vectors(data)
    assignments = np.asarray(assignments, dtype=np.int64)
    if k is None:
        k = int(assignments.max()) + 1
    _check_nonempty(assignments, k)
    if metric_mode == CLASSIC:
        Xf = X.astype(np.float64)
        return np.stack([Xf[assignments == j].mean(axis=0) for j in range(k)])
    if metric_mode == MEDOID:
        if matrix is None:
            matrix = dissimilarity_matrix(X, "composite")
        values = matrix.values if isinstance(matrix, DissimilarityMatrix) else np.asarray(matrix)
        return _medoids(values, assignments, k)
    raise ConfigError(f"unknown metric mode {metric_mode!r}")


def _initial_indices(X, config: ClusterConfig, rng, dist_to) -> np.ndarray:
    n, k = X.shape[0], config.k
    if config.init == "random_points":
        order = rng.permutation(n)
        chosen, seen = [], set()
        for i in order:
            key = X[i].tobytes()
            if key not in seen:
                seen.add(key)
                chosen.append(int(i))
                if len(chosen) == k:
                    break
        if len(chosen) < k:
            taken = set(chosen)
            chosen += [int(i) for i in order if int(i) not in taken][: k - len(chosen)]
        return np.array(chosen, dtype=np.int64)

    chosen = [int(rng.integers(n))]
    closest = dist_to(chosen[0]) ** 2
    for _ in range(1, k):
        total = closest.sum()
        if total > 0:
            nxt = int(rng.choice(n, p=closest / total))
        else:
            free = np.setdiff1d(np.arange(n), chosen)
            nxt = int(free[rng.integers(free.size)])
        chosen.append(nxt)
        closest = np.minimum(closest, dist_to(nxt) ** 2)
    return np.array(chosen, dtype=np.int64)


def _repair_empty(labels, dist, k, on_move):
    sizes = np.bincount(labels, minlength=k)
    for j in range(k):
        if sizes[j] > 0:
            continue
        movable = sizes[labels] > 1
        if not movable.any():
            raise EmptyClusterError([j])
        i = int(np.argmax(np.where(movable, dist, -np.inf)))
        sizes[labels[i]] -= 1
        labels[i] = j
        sizes[j] = 1
        dist[i] = 0.0
        on_move(j, i)


def _lloyd(X, Xf, S, config: ClusterConfig, rng, dist_to):
    n, k = X.shape[0], config.k
    medoid = config.metric_mode == MEDOID
    init = _initial_indices(X, config, rng, dist_to)
    centroids = init.copy() if medoid else Xf[init].copy()

    history = []
    previous = None
    converged = False
    labels = None
    iteration = 0
    for iteration in range(1, config.max_iter + 1):
        if medoid:
            d = S[:, centroids]
        else:
            diff = Xf[:, None, :] - centroids[None, :, :]
            d = (diff * diff).sum(axis=2)
        labels = np.argmin(d, axis=1).astype(np.int64)
        dist = d[np.arange(n), labels].copy()

        def on_move(j, i):
            centroids[j] = i if medoid else Xf[i]

        _repair_empty(labels, dist, k, on_move)
        history.append(float(dist.sum()))
        if previous is not None and np.array_equal(labels, previous):
            converged = True
            break
        if iteration == config.max_iter:
            break
        previous = labels
        if medoid:
            centroids = _medoids(S, labels, k)
        else:
            centroids = np.stack([Xf[labels == j].mean(axis=0) for j in range(k)])

    return ClusterModel(
        config=config,
        centroids=np.asarray(centroids),
        profiles=np.asarray(Xf[centroids] if medoid else centroids, dtype=np.float64),
        assignments=labels,
        objective=history[-1],
        iterations=iteration,
        converged=converged,
        objective_history=tuple(history),
    )


def kmeans_fit(
    dataset,
    config: ClusterConfig,
    matrix: DissimilarityMatrix | np.ndarray | None = None,
    threads: int = 1,
) -> ClusterModel:
    """Alternate assignment and centroid update until assignments repeat.

    ``config.n_init`` restarts draw their initial centroids in sequence from
    one generator seeded with ``config.seed``; the lowest final objective
    wins (earliest restart on ties). ``matrix`` lets medoid-mode callers
    reuse a precomputed composite matrix. A run that hits ``max_iter`` is
    returned with ``converged=False``.
    """
    X = _vectors(dataset)
    n, k = X.shape[0], config.k
    if k > n:
        raise DataError(f"k > n (k={k}, n={n})")
    rng = np.random.default_rng(config.seed)
    Xf = X.astype(np.float64)

    if config.metric_mode == MEDOID:
        if matrix is None:
            matrix = dissimilarity_matrix(X, "composite", threads=threads)
        S = matrix.values if isinstance(matrix, DissimilarityMatrix) else np.asarray(matrix)
        if S.shape != (n, n):
            raise ValueError("matrix shape does not match the dataset")

        def dist_to(i):
            return S[:, i]
    else:
        S = None

        def dist_to(i):
            diff = Xf - Xf[i]
            return np.sqrt((diff * diff).sum(axis=1))

    best = None
    for _ in range(config.n_init):
        model = _lloyd(X, Xf, S, config, rng, dist_to)
        if best is None or model.objective < best.objective:
            best = model
    return best


def model_objective(model: ClusterModel, dataset, matrix=None) -> float:
    """Recompute the objective from the model's fields."""
    X = _vectors(dataset).astype(np.float64)
    n = X.shape[0]
    if model.config.metric_mode == MEDOID:
        if matrix is None:
            matrix = dissimilarity_matrix(X.astype(np.int64), "composite")
        S = matrix.values if isinstance(matrix, DissimilarityMatrix) else np.asarray(matrix)
        dist = S[np.arange(n), model.centroids[model.assignments]]
    else:
        diff = X - model.centroids[model.assignments]
        dist = (diff * diff).sum(axis=1)
    return float(dist.sum())


def label_clusters(model: ClusterModel, polarity: str = LOW_IS_STRONG) -> ClusterModel:
    """Name clusters by the mean score of their centroid profile.

    With ``low_is_strong`` the lowest-mean cluster is ``Strong``. Equal means
    give the lower cluster index the stronger label. Only k in {2, 3} is
    labeled; other k return the model with ``label_warning`` set.
    """
    if polarity not in POLARITIES:
        raise ConfigError(f"polarity must be one of {POLARITIES}")
    k = model.k
    if k not in (2, 3):
        msg = f"labeling skipped: k={k} (only k in {{2,3}} has semantic labels)"
        warnings.warn(msg, stacklevel=2)
        return replace(model, labels=None, label_warning=msg)
    means = model.profiles.mean(axis=1)
    sign = 1.0 if polarity == LOW_IS_STRONG else -1.0
    order = sorted(range(k), key=lambda j: (sign * means[j], j))
    names = (STRONG, NEUTRAL, NOT_STRONG) if k == 3 else (STRONG, NOT_STRONG)
    return replace(model, labels={j: names[r] for r, j in enumerate(order)}, label_warning=None)
