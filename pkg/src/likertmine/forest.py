"""Random-forest classifier over respondent attributes.

Trees are CART classifiers grown on bootstrap samples with Gini splits on
integer codes (``x <= threshold`` goes left). Every tree owns an independent
random stream derived from the forest seed and its index, so results do not
depend on training order or on the number of worker threads.

Importance is permutation based: for each tree, the drop in out-of-bag
accuracy after shuffling one feature among that tree's out-of-bag records,
averaged over repeats and then over trees, times 100 (MDecA).
"""

from __future__ import annotations

import csv
import io
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .errors import ConfigError, DataError
from .kernels import impl
from .survey import ATTRIBUTE_NAMES


@dataclass(frozen=True)
class ForestConfig:
    mtry: int = 4
    ntree: int = 500
    seed: int = 0
    min_leaf: int = 1
    max_depth: int | None = None

    def __post_init__(self):
        if int(self.mtry) < 1:
            raise ConfigError(f"mtry must be >= 1, got {self.mtry}")
        if int(self.ntree) < 1:
            raise ConfigError(f"ntree must be >= 1, got {self.ntree}")
        if int(self.min_leaf) < 1:
            raise ConfigError(f"min_leaf must be >= 1, got {self.min_leaf}")
        if self.max_depth is not None and int(self.max_depth) < 0:
            raise ConfigError(f"max_depth must be >= 0 or None, got {self.max_depth}")
        if not 0 <= int(self.seed) < 2**64:
            raise ConfigError("seed must be an unsigned 64-bit integer")

    def to_dict(self) -> dict:
        return {
            "mtry": int(self.mtry),
            "ntree": int(self.ntree),
            "seed": int(self.seed),
            "min_leaf": int(self.min_leaf),
            "max_depth": None if self.max_depth is None else int(self.max_depth),
        }


@dataclass(frozen=True)
class DecisionTree:
    """Flat node arrays; leaves have ``feature == -1``.

    ``counts[i]`` holds the in-bag class counts reaching node ``i`` (class
    indices, not label codes) and ``leaf_class`` the majority class index,
    ties going to the smallest index.
    """

    feature: np.ndarray
    threshold: np.ndarray
    left: np.ndarray
    right: np.ndarray
    counts: np.ndarray
    leaf_class: np.ndarray
    bootstrap_indices: np.ndarray
    oob_indices: np.ndarray

    @property
    def n_nodes(self) -> int:
        return int(self.feature.shape[0])

    @property
    def n_leaves(self) -> int:
        return int(np.count_nonzero(self.feature < 0))

    def used_features(self) -> set[int]:
        return {int(f) for f in self.feature if f >= 0}

    def apply(self, X: np.ndarray) -> np.ndarray:
        """Class index predicted for each row of integer matrix ``X``."""
        X = np.ascontiguousarray(X, dtype=np.int64)
        return impl.predict_tree(self.feature, self.threshold, self.left, self.right, self.leaf_class, X)


@dataclass(frozen=True)
class ForestModel:
    config: ForestConfig
    classes: tuple[int, ...]
    feature_names: tuple[str, ...]
    trees: tuple[DecisionTree, ...] = field(repr=False)
    oob_votes: np.ndarray = field(repr=False)
    oob_error: float = 0.0
    confusion: np.ndarray = field(default=None, repr=False)

    @property
    def n_features(self) -> int:
        return len(self.feature_names)

    def to_dict(self) -> dict:
        return {
            "config": self.config.to_dict(),
            "classes": list(self.classes),
            "oob_error": self.oob_error,
            "per_class_error": {str(k): v for k, v in per_class_errors(self).items()},
            "confusion": self.confusion.tolist(),
        }


def rank_encode(features: np.ndarray) -> tuple[np.ndarray, list[np.ndarray]]:
    """Replace each column by the rank of its value among the column's distinct values."""
    ranks = np.empty(features.shape, dtype=np.int32)
    levels = []
    for f in range(features.shape[1]):
        uniq, inv = np.unique(features[:, f], return_inverse=True)
        ranks[:, f] = inv
        levels.append(uniq)
    return ranks, levels


def _majority(counts: np.ndarray) -> np.ndarray:
    return np.argmax(counts, axis=-1).astype(np.int32)


def _grow(ranks, levels, y, n_classes, config, seq) -> DecisionTree:
    n = ranks.shape[0]
    rng = np.random.default_rng(seq)
    boot = rng.integers(0, n, size=n)
    kernel_seed = int(rng.integers(0, 2**64, dtype=np.uint64))
    max_depth = -1 if config.max_depth is None else int(config.max_depth)
    feature, thr_rank, left, right, counts = impl.build_tree(
        ranks, y, boot, n_classes, int(config.mtry), int(config.min_leaf), max_depth, kernel_seed
    )
    threshold = np.zeros(feature.shape[0], dtype=np.int64)
    for i in np.flatnonzero(feature >= 0):
        threshold[i] = levels[feature[i]][thr_rank[i]]
    in_bag = np.zeros(n, dtype=bool)
    in_bag[boot] = True
    return DecisionTree(
        feature=np.asarray(feature, dtype=np.int32),
        threshold=threshold,
        left=np.asarray(left, dtype=np.int32),
        right=np.asarray(right, dtype=np.int32),
        counts=np.asarray(counts, dtype=np.int64),
        leaf_class=_majority(counts),
        bootstrap_indices=np.sort(boot),
        oob_indices=np.flatnonzero(~in_bag),
    )


def _map_ordered(fn, items, threads):
    threads = max(1, int(threads))
    if threads == 1:
        return [fn(x) for x in items]
    with ThreadPoolExecutor(max_workers=threads) as pool:
        return list(pool.map(fn, items))


def _check_inputs(features, labels):
    X = np.asarray(features)
    if X.ndim != 2:
        raise DataError("features must be a 2-D matrix")
    if not np.issubdtype(X.dtype, np.integer):
        if not np.all(np.equal(np.mod(X, 1), 0)):
            raise DataError("features must be integer codes")
    X = X.astype(np.int64)
    y = np.asarray(labels).astype(np.int64).ravel()
    if y.shape[0] != X.shape[0]:
        raise DataError(f"{X.shape[0]} feature rows but {y.shape[0]} labels")
    return X, y


def train_forest(
    features,
    labels,
    config: ForestConfig | None = None,
    threads: int = 1,
    feature_names: Sequence[str] | None = None,
) -> ForestModel:
    """Fit ``config.ntree`` trees and score them on their out-of-bag records.

    A record's out-of-bag prediction is the majority vote of trees that did
    not draw it (ties to the smallest label). Records that every tree drew
    have no vote and are left out of ``oob_error``.
    """
    config = config or ForestConfig()
    X, y_raw = _check_inputs(features, labels)
    n, p = X.shape
    if n < 2:
        raise DataError(f"need at least 2 records to train a forest, got {n}")
    if config.mtry > p:
        raise ConfigError(f"mtry={config.mtry} exceeds the feature count {p}")
    names = tuple(feature_names) if feature_names is not None else (
        ATTRIBUTE_NAMES if p == len(ATTRIBUTE_NAMES) else tuple(f"x{j + 1}" for j in range(p))
    )
    if len(names) != p:
        raise ConfigError(f"{len(names)} feature names for {p} columns")

    classes, y = np.unique(y_raw, return_inverse=True)
    y = y.astype(np.int32)
    n_classes = classes.shape[0]
    ranks, levels = rank_encode(X)
    seqs = np.random.SeedSequence(int(config.seed)).spawn(int(config.ntree))
    trees = _map_ordered(lambda s: _grow(ranks, levels, y, n_classes, config, s), seqs, threads)

    votes = np.zeros((n, n_classes), dtype=np.int64)
    for tree in trees:
        oob = tree.oob_indices
        if oob.size:
            votes[oob, tree.apply(X[oob])] += 1
    confusion = np.zeros((n_classes, n_classes), dtype=np.int64)
    voted = votes.sum(axis=1) > 0
    np.add.at(confusion, (y[voted], _majority(votes[voted])), 1)
    total = int(confusion.sum())
    oob_error = 0.0 if total == 0 else float((total - np.trace(confusion)) / total)
    return ForestModel(
        config=config,
        classes=tuple(int(c) for c in classes),
        feature_names=names,
        trees=tuple(trees),
        oob_votes=votes,
        oob_error=oob_error,
        confusion=confusion,
    )


def predict_votes(model: ForestModel, X) -> np.ndarray:
    """Per-row vote fractions over ``model.classes``."""
    X = np.atleast_2d(np.asarray(X, dtype=np.int64))
    if X.shape[1] != model.n_features:
        raise DataError(f"expected {model.n_features} features, got {X.shape[1]}")
    votes = np.zeros((X.shape[0], len(model.classes)), dtype=np.int64)
    rows = np.arange(X.shape[0])
    for tree in model.trees:
        votes[rows, tree.apply(X)] += 1
    return votes / len(model.trees)


def predict(model: ForestModel, row) -> tuple[int, dict[int, float]]:
    """Majority-vote label for one feature row and the vote fraction per label.

    Ties go to the smallest label code. Codes never seen in training are
    routed by the thresholds like any other integer.
    """
    frac = predict_votes(model, [row])[0]
    label = model.classes[int(np.argmax(frac))]
    return label, {c: float(v) for c, v in zip(model.classes, frac)}


def predict_labels(model: ForestModel, X) -> np.ndarray:
    frac = predict_votes(model, X)
    return np.asarray(model.classes, dtype=np.int64)[np.argmax(frac, axis=1)]


def class_errors_from_confusion(confusion, classes: Sequence[int]) -> dict[int, float]:
    """Row-wise misclassification rates; classes with no records are omitted."""
    confusion = np.asarray(confusion)
    out = {}
    for i, c in enumerate(classes):
        row_total = int(confusion[i].sum())
        if row_total:
            out[int(c)] = float((row_total - int(confusion[i, i])) / row_total)
    return out


def per_class_errors(model: ForestModel) -> dict[int, float]:
    """Out-of-bag error rate of each training class."""
    return class_errors_from_confusion(model.confusion, model.classes)


@dataclass(frozen=True)
class ImportanceReport:
    feature_names: tuple[str, ...]
    mdeca: np.ndarray
    repeats: int
    seed: int

    @property
    def ranking(self) -> tuple[str, ...]:
        """Feature names by decreasing MDecA; equal scores keep column order."""
        order = sorted(range(len(self.feature_names)), key=lambda j: (-self.mdeca[j], j))
        return tuple(self.feature_names[j] for j in order)

    def as_dict(self) -> dict[str, float]:
        return {name: float(v) for name, v in zip(self.feature_names, self.mdeca)}

    def table(self) -> list[tuple[str, float]]:
        scores = self.as_dict()
        return [(name, scores[name]) for name in self.ranking]

    def to_csv(self) -> str:
        buf = io.StringIO()
        writer = csv.writer(buf, lineterminator="\n")
        writer.writerow(["factor", "MDecA"])
        for name, value in self.table():
            writer.writerow([name, repr(value)])
        return buf.getvalue()


def _tree_importance(tree: DecisionTree, t: int, X, y, repeats: int, seed: int) -> np.ndarray:
    p = X.shape[1]
    out = np.zeros(p)
    oob = tree.oob_indices
    if oob.size == 0:
        return out
    Xo = X[oob]
    yo = y[oob]
    base = np.count_nonzero(tree.apply(Xo) == yo)
    used = tree.used_features()
    for f in range(p):
        if f not in used:
            continue
        rng = np.random.default_rng([int(seed), t, f])
        drops = 0
        for _ in range(repeats):
            shuffled = Xo.copy()
            shuffled[:, f] = Xo[rng.permutation(oob.size), f]
            drops += base - np.count_nonzero(tree.apply(shuffled) == yo)
        out[f] = drops / (repeats * oob.size)
    return out


def permutation_importance(
    model: ForestModel, features, labels, repeats: int = 5, seed: int = 0, threads: int = 1
) -> ImportanceReport:
    """Mean decrease in out-of-bag accuracy (x100) per feature.

    ``features`` and ``labels`` must be the training data, since each tree's
    out-of-bag rows are stored as indices into it. Trees without out-of-bag
    rows are left out of the mean. A feature no tree splits on scores
    exactly 0.
    """
    if repeats < 1:
        raise ConfigError(f"repeats must be >= 1, got {repeats}")
    X, y_raw = _check_inputs(features, labels)
    if X.shape[1] != model.n_features:
        raise DataError(f"expected {model.n_features} features, got {X.shape[1]}")
    if X.shape[0] != model.oob_votes.shape[0]:
        raise DataError("importance needs the training records the model was fit on")
    lookup = {c: i for i, c in enumerate(model.classes)}
    y = np.array([lookup.get(int(v), -1) for v in y_raw], dtype=np.int64)

    per_tree = _map_ordered(
        lambda t: _tree_importance(model.trees[t], t, X, y, int(repeats), int(seed)),
        range(len(model.trees)),
        threads,
    )
    scored = [t for t, tree in enumerate(model.trees) if tree.oob_indices.size]
    if scored:
        mdeca = np.sum([per_tree[t] for t in scored], axis=0) / len(scored) * 100.0
    else:
        mdeca = np.zeros(X.shape[1])
    return ImportanceReport(model.feature_names, mdeca, int(repeats), int(seed))
