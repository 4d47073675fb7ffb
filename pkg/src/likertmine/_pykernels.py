"""Pure-Python/numpy implementations of the hot kernels.

Every function here has a twin in ``_kernels.pyx`` with the same signature.
Integer kernels and tree building must agree bit-for-bit with the compiled
versions; the t-SNE kernels agree to rounding.
"""

import numpy as np

METRIC_LEVENSHTEIN = 0
METRIC_EUCLIDEAN = 1
METRIC_COMPOSITE = 2

_MASK64 = (1 << 64) - 1


def levenshtein(a, b):
    """Edit distance by the full (m+1) x (n+1) table with unit costs."""
    a = list(a)
    b = list(b)
    m, n = len(a), len(b)
    d = [[0] * (n + 1) for _ in range(m + 1)]
    for i in range(m + 1):
        d[i][0] = i
    for j in range(n + 1):
        d[0][j] = j
    for i in range(1, m + 1):
        ai = a[i - 1]
        row, prev = d[i], d[i - 1]
        for j in range(1, n + 1):
            sub = prev[j - 1] + (0 if ai == b[j - 1] else 1)
            row[j] = min(prev[j] + 1, row[j - 1] + 1, sub)
    return d[m][n]


def _levenshtein_against(a, block):
    """Edit distances from sequence ``a`` to every row of ``block``."""
    r, n = block.shape
    m = a.shape[0]
    prev = np.broadcast_to(np.arange(n + 1, dtype=np.int64), (r, n + 1)).copy()
    cur = np.empty_like(prev)
    for i in range(1, m + 1):
        cur[:, 0] = i
        mismatch = (block != a[i - 1]).astype(np.int64)
        for j in range(1, n + 1):
            np.minimum(prev[:, j] + 1, cur[:, j - 1] + 1, out=cur[:, j])
            np.minimum(cur[:, j], prev[:, j - 1] + mismatch[:, j - 1], out=cur[:, j])
        prev, cur = cur, prev
    return prev[:, n]


def pairwise_dissimilarity(X, metric, start, stop, out):
    """Fill rows ``start:stop`` of the upper triangle of ``out`` and mirror them."""
    X = np.asarray(X, dtype=np.int64)
    n = X.shape[0]
    for i in range(start, stop):
        if i + 1 >= n:
            continue
        block = X[i + 1 :]
        if metric == METRIC_LEVENSHTEIN:
            vals = _levenshtein_against(X[i], block).astype(np.float64)
        else:
            sq = ((block - X[i]) ** 2).sum(axis=1)
            vals = np.sqrt(sq.astype(np.float64))
            if metric == METRIC_COMPOSITE:
                lev = _levenshtein_against(X[i], block).astype(np.float64)
                vals = (1.0 + lev) * vals
        out[i, i + 1 :] = vals
        out[i + 1 :, i] = vals


class SplitMix64:
    """Tiny counter-based generator shared with the compiled tree builder."""

    def __init__(self, seed):
        self.state = int(seed) & _MASK64

    def next(self):
        self.state = (self.state + 0x9E3779B97F4A7C15) & _MASK64
        z = self.state
        z = ((z ^ (z >> 30)) * 0xBF58476D1CE4E5B9) & _MASK64
        z = ((z ^ (z >> 27)) * 0x94D049BB133111EB) & _MASK64
        return z ^ (z >> 31)

    def bounded(self, m):
        return ((self.next() >> 32) * m) >> 32


def _best_split(ranks, y, idx, feats, n_classes, min_leaf, total):
    """Best (feature, rank threshold) among ``feats`` (ascending), or None."""
    best_score = -1.0
    best = None
    n_node = idx.shape[0]
    yi = y[idx]
    for f in feats:
        col = ranks[idx, f]
        lo = int(col.min())
        hi = int(col.max())
        if lo == hi:
            continue
        width = hi - lo + 1
        hist = np.bincount(
            (col - lo).astype(np.int64) * n_classes + yi, minlength=width * n_classes
        ).reshape(width, n_classes)
        left = np.cumsum(hist, axis=0)[:-1]
        n_left = left.sum(axis=1)
        n_right = n_node - n_left
        ok = (hist[:-1].sum(axis=1) > 0) & (n_left >= min_leaf) & (n_right >= min_leaf)
        if not ok.any():
            continue
        right = total[None, :] - left
        s_left = (left * left).sum(axis=1)
        s_right = (right * right).sum(axis=1)
        with np.errstate(divide="ignore", invalid="ignore"):
            score = s_left / n_left + s_right / n_right
        for r in np.flatnonzero(ok):
            if score[r] > best_score:
                best_score = float(score[r])
                best = (int(f), lo + int(r))
    return best


def build_tree(ranks, y, samples, n_classes, mtry, min_leaf, max_depth, seed):
    """Grow one CART classification tree on the in-bag ``samples``.

    Returns ``(feature, threshold_rank, left, right, counts)`` where leaves
    carry ``feature == -1`` and ``counts`` holds in-bag class counts per node.
    """
    ranks = np.asarray(ranks, dtype=np.int32)
    y = np.asarray(y, dtype=np.int64)
    n_features = ranks.shape[1]
    rng = SplitMix64(seed)

    feature, threshold, left, right, counts = [], [], [], [], []

    def new_node():
        feature.append(-1)
        threshold.append(-1)
        left.append(-1)
        right.append(-1)
        counts.append(None)
        return len(feature) - 1

    root = new_node()
    stack = [(root, np.asarray(samples, dtype=np.int64), 0)]
    while stack:
        node, idx, depth = stack.pop()
        total = np.bincount(y[idx], minlength=n_classes).astype(np.int64)
        counts[node] = total
        n_node = idx.shape[0]
        if (
            np.count_nonzero(total) <= 1
            or n_node < 2 * min_leaf
            or (max_depth >= 0 and depth >= max_depth)
        ):
            continue
        feats = list(range(n_features))
        for i in range(mtry):
            j = i + rng.bounded(n_features - i)
            feats[i], feats[j] = feats[j], feats[i]
        split = _best_split(ranks, y, idx, sorted(feats[:mtry]), n_classes, min_leaf, total)
        if split is None and mtry < n_features:
            split = _best_split(
                ranks, y, idx, sorted(feats[mtry:]), n_classes, min_leaf, total
            )
        if split is None:
            continue
        f, thr = split
        go_left = ranks[idx, f] <= thr
        lnode = new_node()
        rnode = new_node()
        feature[node] = f
        threshold[node] = thr
        left[node] = lnode
        right[node] = rnode
        stack.append((rnode, idx[~go_left], depth + 1))
        stack.append((lnode, idx[go_left], depth + 1))

    return (
        np.array(feature, dtype=np.int32),
        np.array(threshold, dtype=np.int32),
        np.array(left, dtype=np.int32),
        np.array(right, dtype=np.int32),
        np.array(counts, dtype=np.int64).reshape(len(feature), n_classes),
    )


def predict_tree(feature, threshold, left, right, leaf_class, X):
    """Route each row of integer matrix ``X``; returns leaf class indices."""
    X = np.asarray(X, dtype=np.int64)
    n = X.shape[0]
    node = np.zeros(n, dtype=np.int64)
    rows = np.arange(n)
    active = feature[node] >= 0
    while active.any():
        a = rows[active]
        nd = node[a]
        f = feature[nd]
        go_left = X[a, f] <= threshold[nd]
        node[a] = np.where(go_left, left[nd], right[nd])
        active = feature[node] >= 0
    return np.asarray(leaf_class, dtype=np.int32)[node]


def tsne_forces_rows(P, Y, exaggeration, start, stop, attr, rep, wsum):
    """One pass over rows ``start:stop`` of the t-SNE gradient terms.

    With w_ij = 1 / (1 + |y_i - y_j|^2):
    attr[i] = sum_j a p_ij w_ij (y_i - y_j), rep[i] = sum_j w_ij^2 (y_i - y_j),
    wsum[i] = sum_{j != i} w_ij. The gradient is 4 (attr - rep / Z) with
    Z = sum(wsum).
    """
    diff = Y[start:stop, None, :] - Y[None, :, :]
    w = 1.0 / (1.0 + (diff * diff).sum(axis=2))
    w[np.arange(stop - start), np.arange(start, stop)] = 0.0
    attr[start:stop] = ((exaggeration * P[start:stop] * w)[:, :, None] * diff).sum(axis=1)
    rep[start:stop] = ((w * w)[:, :, None] * diff).sum(axis=1)
    wsum[start:stop] = w.sum(axis=1)


def tsne_kl_rows(P, Y, Z, start, stop, out):
    """out[i] = sum_j p_ij log(p_ij / q_ij) over p_ij > 0."""
    diff = Y[start:stop, None, :] - Y[None, :, :]
    w = 1.0 / (1.0 + (diff * diff).sum(axis=2))
    p = P[start:stop]
    mask = p > 0
    mask[np.arange(stop - start), np.arange(start, stop)] = False
    terms = np.zeros_like(p)
    terms[mask] = p[mask] * np.log(p[mask] * Z / w[mask])
    out[start:stop] = terms.sum(axis=1)
