"""Exact t-SNE: perplexity-calibrated Gaussian affinities, Student-t embedding.

Optimization is gradient descent with momentum (0.5, then 0.8), early
exaggeration of the affinities for the first iterations, and per-coordinate
adaptive gains (grow by 0.2 when the step changes direction, shrink by 0.8
otherwise, floor 0.01). No Barnes-Hut approximation; cost is O(n^2) per
iteration.
"""

from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass

import numpy as np

from .errors import ConfigError, DataError, NumericalError
from .kernels import impl
from .similarity import DissimilarityMatrix
from .survey import Dataset


@dataclass(frozen=True)
class TSNEConfig:
    perplexity: float = 30.0
    iterations: int = 1000
    learning_rate: float = 200.0
    seed: int = 0
    early_exaggeration: float = 12.0
    exaggeration_iters: int = 250
    momentum_initial: float = 0.5
    momentum_final: float = 0.8
    momentum_switch: int = 250
    init_scale: float = 1e-4
    kl_every: int = 10
    min_gain: float = 0.01

    def __post_init__(self):
        if not self.perplexity > 0:
            raise ConfigError("perplexity must be positive")
        if self.iterations < 0:
            raise ConfigError("iterations must be >= 0")
        if not self.learning_rate > 0:
            raise ConfigError("learning_rate must be positive")
        if self.kl_every < 1:
            raise ConfigError("kl_every must be >= 1")


@dataclass(frozen=True)
class EmbeddingResult:
    coords: np.ndarray
    final_kl: float
    config: TSNEConfig
    kl_history: tuple[tuple[int, float], ...] = ()

    def to_dict(self) -> dict:
        return {"final_kl": self.final_kl, "n_points": int(self.coords.shape[0]), "config": asdict(self.config)}


def squared_distances(data) -> np.ndarray:
    """Squared pairwise distances of feature rows, or squared matrix entries."""
    if isinstance(data, DissimilarityMatrix):
        return data.values * data.values
    X = data.likert_matrix if isinstance(data, Dataset) else np.asarray(data)
    X = X.astype(np.float64)
    out = np.empty((X.shape[0], X.shape[0]))
    for i in range(X.shape[0]):
        diff = X - X[i]
        out[i] = (diff * diff).sum(axis=1)
    return out


def _row_conditional(d_row, beta):
    # d_row excludes the point itself; shifting by the minimum avoids underflow.
    shifted = d_row - d_row.min()
    e = np.exp(-beta * shifted)
    total = e.sum()
    p = e / total
    entropy = math.log(total) + beta * float((p * shifted).sum())
    return p, entropy


def conditional_affinities(
    sqdist: np.ndarray, perplexity: float, tol: float = 1e-5, max_steps: int = 100
) -> np.ndarray:
    """Row-stochastic P(j|i) whose rows each have the target perplexity.

    The Gaussian precision of each row is found by bisection (with doubling
    or halving until the root is bracketed) until ``|exp(H) - perplexity|``
    is below ``tol``. Raises ``NumericalError`` naming the row otherwise.

    A row whose neighbours are all equidistant (up to a relative ``1e-12``,
    which absorbs rounding in coordinates such as sqrt(3)/2) is uniform for
    every bandwidth, so it is emitted uniform without searching.
    """
    n = sqdist.shape[0]
    target = math.log(perplexity)
    out = np.zeros((n, n))
    for i in range(n):
        d_row = np.delete(sqdist[i], i)
        if d_row.max() - d_row.min() <= 1e-12 * d_row.max():
            out[i] = 1.0 / (n - 1)
            out[i, i] = 0.0
            continue
        beta, lo, hi = 1.0, 0.0, math.inf
        for _ in range(max_steps):
            p, h = _row_conditional(d_row, beta)
            if abs(math.exp(h) - perplexity) < tol:
                break
            if h > target:
                lo = beta
                beta = beta * 2.0 if hi == math.inf else (beta + hi) / 2.0
            else:
                hi = beta
                beta = (beta + lo) / 2.0
        else:
            raise NumericalError(
                f"perplexity bisection did not converge for row {i} "
                f"(reached {math.exp(h):.6g}, target {perplexity})"
            )
        out[i, :i] = p[:i]
        out[i, i + 1 :] = p[i:]
    return out


def tsne_affinities(data, perplexity: float = 30.0) -> np.ndarray:
    """Symmetric joint affinities ``(P(j|i) + P(i|j)) / 2n`` summing to 1."""
    sq = squared_distances(data)
    n = sq.shape[0]
    if n < 3:
        raise DataError("t-SNE needs at least 3 points")
    if not 0 < perplexity < n:
        raise ConfigError(f"perplexity must lie in (0, n={n}), got {perplexity}")
    cond = conditional_affinities(sq, perplexity)
    return (cond + cond.T) / (2.0 * n)


def _blocks(n, threads):
    step = max(1, -(-n // threads))
    return [(s, min(n, s + step)) for s in range(0, n, step)]


def _run_blocks(fn, n, threads):
    threads = max(1, int(threads))
    if threads == 1:
        fn(0, n)
        return
    with ThreadPoolExecutor(max_workers=threads) as pool:
        list(pool.map(lambda se: fn(*se), _blocks(n, threads)))


def tsne_gradient(P: np.ndarray, Y: np.ndarray, exaggeration: float = 1.0, threads: int = 1) -> np.ndarray:
    """Gradient of KL(P || Q) with respect to the embedding ``Y``."""
    P = np.ascontiguousarray(P, dtype=np.float64)
    Y = np.ascontiguousarray(Y, dtype=np.float64)
    n, d = Y.shape
    attr = np.zeros((n, d))
    rep = np.zeros((n, d))
    wsum = np.zeros(n)
    _run_blocks(lambda s, e: impl.tsne_forces_rows(P, Y, exaggeration, s, e, attr, rep, wsum), n, threads)
    Z = float(wsum.sum())
    return 4.0 * (attr - rep / Z)


def tsne_kl(P: np.ndarray, Y: np.ndarray, threads: int = 1) -> float:
    """KL(P || Q) with Student-t (one degree of freedom) affinities Q."""
    P = np.ascontiguousarray(P, dtype=np.float64)
    Y = np.ascontiguousarray(Y, dtype=np.float64)
    n, d = Y.shape
    attr = np.zeros((n, d))
    rep = np.zeros((n, d))
    wsum = np.zeros(n)
    _run_blocks(lambda s, e: impl.tsne_forces_rows(P, Y, 1.0, s, e, attr, rep, wsum), n, threads)
    Z = float(wsum.sum())
    rows = np.zeros(n)
    _run_blocks(lambda s, e: impl.tsne_kl_rows(P, Y, Z, s, e, rows), n, threads)
    return float(rows.sum())


def initial_embedding(n: int, config: TSNEConfig, dims: int = 2) -> np.ndarray:
    rng = np.random.default_rng(config.seed)
    return rng.normal(0.0, config.init_scale, size=(n, dims))


def tsne_embed(P: np.ndarray, config: TSNEConfig | None = None, threads: int = 1, **overrides) -> EmbeddingResult:
    """Minimize KL(P || Q) by momentum gradient descent from a seeded start.

    ``kl_history`` records (iteration, KL) every ``config.kl_every`` steps and
    at the end, always against the unexaggerated P.
    """
    if config is None:
        config = TSNEConfig(**overrides)
    elif overrides:
        config = TSNEConfig(**{**asdict(config), **overrides})
    P = np.ascontiguousarray(P, dtype=np.float64)
    n = P.shape[0]
    Y = initial_embedding(n, config)
    velocity = np.zeros_like(Y)
    gains = np.ones_like(Y)
    history = []
    for it in range(config.iterations):
        exaggeration = config.early_exaggeration if it < config.exaggeration_iters else 1.0
        momentum = config.momentum_initial if it < config.momentum_switch else config.momentum_final
        with np.errstate(all="ignore"):
            grad = tsne_gradient(P, Y, exaggeration, threads)
        flipped = np.sign(grad) != np.sign(velocity)
        gains = np.maximum(np.where(flipped, gains + 0.2, gains * 0.8), config.min_gain)
        velocity = momentum * velocity - config.learning_rate * gains * grad
        with np.errstate(all="ignore"):
            Y = Y + velocity
            Y = Y - Y.mean(axis=0)
        if not np.isfinite(Y).all():
            raise NumericalError(f"t-SNE produced non-finite coordinates at iteration {it + 1}")
        if (it + 1) % config.kl_every == 0:
            history.append((it + 1, tsne_kl(P, Y, threads)))
    final_kl = tsne_kl(P, Y, threads)
    if not math.isfinite(final_kl):
        raise NumericalError(f"t-SNE KL is not finite after {config.iterations} iterations")
    if not history or history[-1][0] != config.iterations:
        history.append((config.iterations, final_kl))
    return EmbeddingResult(Y, max(final_kl, 0.0), config, tuple(history))
