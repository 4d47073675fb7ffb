# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True, initializedcheck=False
"""Compiled hot kernels. Mirrors ``_pykernels`` function for function.

All loops run without the GIL so callers can spread row blocks or trees over
a thread pool. Floating-point expressions follow the pure-Python twin
operation for operation (no fast-math) so tree building stays bit-identical.
"""

import numpy as np

from libc.math cimport log, sqrt
from libc.stdint cimport int32_t, int64_t, uint64_t
from libc.stdlib cimport free, malloc, realloc
from libc.string cimport memcpy, memset

METRIC_LEVENSHTEIN = 0
METRIC_EUCLIDEAN = 1
METRIC_COMPOSITE = 2


cdef inline int64_t _min3(int64_t a, int64_t b, int64_t c) noexcept nogil:
    if b < a:
        a = b
    if c < a:
        a = c
    return a


cdef int64_t _lev(const int64_t* a, Py_ssize_t m, const int64_t* b, Py_ssize_t n,
                  int64_t* row) noexcept nogil:
    # Single rolling row of the (m+1) x (n+1) table.
    cdef Py_ssize_t i, j
    cdef int64_t diag, tmp, cost
    for j in range(n + 1):
        row[j] = j
    for i in range(1, m + 1):
        diag = row[0]
        row[0] = i
        for j in range(1, n + 1):
            tmp = row[j]
            cost = 0 if a[i - 1] == b[j - 1] else 1
            row[j] = _min3(row[j] + 1, row[j - 1] + 1, diag + cost)
            diag = tmp
    return row[n]


def levenshtein(a, b):
    cdef int64_t[::1] av = np.ascontiguousarray(np.asarray(list(a), dtype=np.int64))
    cdef int64_t[::1] bv = np.ascontiguousarray(np.asarray(list(b), dtype=np.int64))
    cdef Py_ssize_t m = av.shape[0], n = bv.shape[0]
    cdef int64_t* row = <int64_t*>malloc((n + 1) * sizeof(int64_t))
    cdef int64_t out
    cdef int64_t dummy = 0
    if row == NULL:
        raise MemoryError()
    try:
        out = _lev(&av[0] if m > 0 else &dummy, m, &bv[0] if n > 0 else &dummy, n, row)
    finally:
        free(row)
    return int(out)


def pairwise_dissimilarity(X, int metric, Py_ssize_t start, Py_ssize_t stop, double[:, ::1] out):
    cdef const int64_t[:, ::1] x = np.ascontiguousarray(X, dtype=np.int64)
    cdef Py_ssize_t n = x.shape[0], m = x.shape[1]
    cdef Py_ssize_t i, j, t
    cdef int64_t sq, diff, lev
    cdef double val
    cdef int64_t* row
    if n == 0 or m == 0:
        return
    row = <int64_t*>malloc((m + 1) * sizeof(int64_t))
    if row == NULL:
        raise MemoryError()
    with nogil:
        for i in range(start, stop):
            for j in range(i + 1, n):
                if metric == 0:
                    val = <double>_lev(&x[i, 0], m, &x[j, 0], m, row)
                else:
                    sq = 0
                    for t in range(m):
                        diff = x[i, t] - x[j, t]
                        sq = sq + diff * diff
                    val = sqrt(<double>sq)
                    if metric == 2:
                        lev = _lev(&x[i, 0], m, &x[j, 0], m, row)
                        val = (1.0 + <double>lev) * val
                out[i, j] = val
                out[j, i] = val
    free(row)


cdef inline uint64_t _splitmix(uint64_t* state) noexcept nogil:
    state[0] = state[0] + <uint64_t>0x9E3779B97F4A7C15ULL
    cdef uint64_t z = state[0]
    z = (z ^ (z >> 30)) * <uint64_t>0xBF58476D1CE4E5B9ULL
    z = (z ^ (z >> 27)) * <uint64_t>0x94D049BB133111EBULL
    return z ^ (z >> 31)


cdef inline Py_ssize_t _bounded(uint64_t* state, Py_ssize_t m) noexcept nogil:
    return <Py_ssize_t>(((_splitmix(state) >> 32) * <uint64_t>m) >> 32)


cdef struct NodeStore:
    int32_t* feature
    int32_t* threshold
    int32_t* left
    int32_t* right
    int64_t* counts
    Py_ssize_t size
    Py_ssize_t cap
    int n_classes


cdef int _store_grow(NodeStore* s) noexcept nogil:
    cdef Py_ssize_t cap = s.cap * 2 if s.cap > 0 else 64
    cdef void* p
    p = realloc(s.feature, cap * sizeof(int32_t))
    if p == NULL:
        return -1
    s.feature = <int32_t*>p
    p = realloc(s.threshold, cap * sizeof(int32_t))
    if p == NULL:
        return -1
    s.threshold = <int32_t*>p
    p = realloc(s.left, cap * sizeof(int32_t))
    if p == NULL:
        return -1
    s.left = <int32_t*>p
    p = realloc(s.right, cap * sizeof(int32_t))
    if p == NULL:
        return -1
    s.right = <int32_t*>p
    p = realloc(s.counts, cap * s.n_classes * sizeof(int64_t))
    if p == NULL:
        return -1
    s.counts = <int64_t*>p
    s.cap = cap
    return 0


cdef Py_ssize_t _new_node(NodeStore* s) noexcept nogil:
    if s.size == s.cap:
        if _store_grow(s) != 0:
            return -1
    cdef Py_ssize_t k = s.size
    s.feature[k] = -1
    s.threshold[k] = -1
    s.left[k] = -1
    s.right[k] = -1
    memset(&s.counts[k * s.n_classes], 0, s.n_classes * sizeof(int64_t))
    s.size += 1
    return k


cdef int _best_split(const int32_t[:, ::1] ranks, const int32_t[::1] y,
                     const int64_t* idx, Py_ssize_t n_node,
                     const Py_ssize_t* feats, Py_ssize_t n_feats,
                     int n_classes, int min_leaf, const int64_t* total,
                     int64_t* hist, int64_t* cleft,
                     double* best_score, Py_ssize_t* best_f, Py_ssize_t* best_thr) noexcept nogil:
    cdef Py_ssize_t a, k, f, s, r, c, lo, hi, width
    cdef int64_t n_left, n_right, row_count, s_left, s_right, v
    cdef double score
    cdef int found = 0
    for a in range(n_feats):
        f = feats[a]
        lo = ranks[idx[0], f]
        hi = lo
        for s in range(1, n_node):
            r = ranks[idx[s], f]
            if r < lo:
                lo = r
            if r > hi:
                hi = r
        if lo == hi:
            continue
        width = hi - lo + 1
        memset(hist, 0, width * n_classes * sizeof(int64_t))
        for s in range(n_node):
            k = idx[s]
            hist[(ranks[k, f] - lo) * n_classes + y[k]] += 1
        memset(cleft, 0, n_classes * sizeof(int64_t))
        n_left = 0
        for r in range(width - 1):
            row_count = 0
            for c in range(n_classes):
                cleft[c] += hist[r * n_classes + c]
                row_count += hist[r * n_classes + c]
            n_left += row_count
            if row_count == 0:
                continue
            n_right = n_node - n_left
            if n_left < min_leaf or n_right < min_leaf:
                continue
            s_left = 0
            s_right = 0
            for c in range(n_classes):
                s_left += cleft[c] * cleft[c]
                v = total[c] - cleft[c]
                s_right += v * v
            score = <double>s_left / <double>n_left + <double>s_right / <double>n_right
            if score > best_score[0]:
                best_score[0] = score
                best_f[0] = f
                best_thr[0] = lo + r
                found = 1
    return found


cdef inline void _sort_small(Py_ssize_t* a, Py_ssize_t n) noexcept nogil:
    cdef Py_ssize_t i, j, t
    for i in range(1, n):
        t = a[i]
        j = i - 1
        while j >= 0 and a[j] > t:
            a[j + 1] = a[j]
            j -= 1
        a[j + 1] = t


def build_tree(ranks, y, samples, int n_classes, int mtry, int min_leaf,
               int max_depth, uint64_t seed):
    cdef const int32_t[:, ::1] rk = np.ascontiguousarray(ranks, dtype=np.int32)
    cdef const int32_t[::1] yv = np.ascontiguousarray(y, dtype=np.int32)
    cdef int64_t[::1] idx_mv = np.array(samples, dtype=np.int64)
    cdef Py_ssize_t n_samples = idx_mv.shape[0]
    cdef Py_ssize_t n_features = rk.shape[1]
    cdef Py_ssize_t max_rank = 0
    if rk.shape[0] > 0 and n_features > 0:
        max_rank = int(np.max(ranks))
    cdef NodeStore st
    st.feature = NULL
    st.threshold = NULL
    st.left = NULL
    st.right = NULL
    st.counts = NULL
    st.size = 0
    st.cap = 0
    st.n_classes = n_classes

    cdef int64_t* idx = NULL
    cdef int64_t* tmp = NULL
    cdef int64_t* hist = NULL
    cdef int64_t* cleft = NULL
    cdef Py_ssize_t* feats = NULL
    cdef Py_ssize_t* stack = NULL
    cdef int failed = 0

    cdef Py_ssize_t sp, node, start, end, depth, n_node, s, c, i, j, t, nonzero
    cdef Py_ssize_t best_f, best_thr, lnode, rnode, nl, nr
    cdef double best_score
    cdef int found
    cdef int64_t* cnt
    cdef uint64_t state = seed

    idx = <int64_t*>malloc((n_samples + 1) * sizeof(int64_t))
    tmp = <int64_t*>malloc((n_samples + 1) * sizeof(int64_t))
    hist = <int64_t*>malloc((max_rank + 1) * n_classes * sizeof(int64_t))
    cleft = <int64_t*>malloc(n_classes * sizeof(int64_t))
    feats = <Py_ssize_t*>malloc((n_features + 1) * sizeof(Py_ssize_t))
    # Each stack frame: node, start, end, depth.  At most 2 frames per level
    # pushed before popping, bounded by 2 * (n_samples + 1).
    stack = <Py_ssize_t*>malloc(4 * 2 * (n_samples + 2) * sizeof(Py_ssize_t))
    if (idx == NULL or tmp == NULL or hist == NULL or cleft == NULL
            or feats == NULL or stack == NULL):
        free(idx); free(tmp); free(hist); free(cleft); free(feats); free(stack)
        raise MemoryError()
    if n_samples > 0:
        memcpy(idx, &idx_mv[0], n_samples * sizeof(int64_t))

    with nogil:
        node = _new_node(&st)
        if node < 0:
            failed = 1
        sp = 0
        stack[0] = node
        stack[1] = 0
        stack[2] = n_samples
        stack[3] = 0
        sp = 1
        while sp > 0 and not failed:
            sp -= 1
            node = stack[4 * sp]
            start = stack[4 * sp + 1]
            end = stack[4 * sp + 2]
            depth = stack[4 * sp + 3]
            n_node = end - start
            cnt = &st.counts[node * n_classes]
            for s in range(start, end):
                cnt[yv[idx[s]]] += 1
            nonzero = 0
            for c in range(n_classes):
                if cnt[c] > 0:
                    nonzero += 1
            if nonzero <= 1 or n_node < 2 * min_leaf or (max_depth >= 0 and depth >= max_depth):
                continue
            for i in range(n_features):
                feats[i] = i
            for i in range(mtry):
                j = i + _bounded(&state, n_features - i)
                t = feats[i]
                feats[i] = feats[j]
                feats[j] = t
            _sort_small(feats, mtry)
            best_score = -1.0
            best_f = -1
            best_thr = -1
            found = _best_split(rk, yv, &idx[start], n_node, feats, mtry, n_classes,
                                min_leaf, cnt, hist, cleft, &best_score, &best_f, &best_thr)
            if not found and mtry < n_features:
                _sort_small(&feats[mtry], n_features - mtry)
                found = _best_split(rk, yv, &idx[start], n_node, &feats[mtry],
                                    n_features - mtry, n_classes, min_leaf, cnt, hist,
                                    cleft, &best_score, &best_f, &best_thr)
            if not found:
                continue
            # Stable partition: left keeps rank <= threshold.
            nl = 0
            for s in range(start, end):
                if rk[idx[s], best_f] <= best_thr:
                    tmp[nl] = idx[s]
                    nl += 1
            nr = nl
            for s in range(start, end):
                if rk[idx[s], best_f] > best_thr:
                    tmp[nr] = idx[s]
                    nr += 1
            memcpy(&idx[start], tmp, n_node * sizeof(int64_t))
            lnode = _new_node(&st)
            rnode = _new_node(&st)
            if lnode < 0 or rnode < 0:
                failed = 1
                break
            st.feature[node] = <int32_t>best_f
            st.threshold[node] = <int32_t>best_thr
            st.left[node] = <int32_t>lnode
            st.right[node] = <int32_t>rnode
            stack[4 * sp] = rnode
            stack[4 * sp + 1] = start + nl
            stack[4 * sp + 2] = end
            stack[4 * sp + 3] = depth + 1
            sp += 1
            stack[4 * sp] = lnode
            stack[4 * sp + 1] = start
            stack[4 * sp + 2] = start + nl
            stack[4 * sp + 3] = depth + 1
            sp += 1

    free(idx); free(tmp); free(hist); free(cleft); free(feats); free(stack)
    if failed:
        free(st.feature); free(st.threshold); free(st.left); free(st.right); free(st.counts)
        raise MemoryError()

    cdef Py_ssize_t size = st.size
    feature = np.empty(size, dtype=np.int32)
    threshold = np.empty(size, dtype=np.int32)
    left = np.empty(size, dtype=np.int32)
    right = np.empty(size, dtype=np.int32)
    counts = np.empty((size, n_classes), dtype=np.int64)
    cdef int32_t[::1] fv = feature, tv = threshold, lv = left, rv = right
    cdef int64_t[:, ::1] cv = counts
    if size > 0:
        memcpy(&fv[0], st.feature, size * sizeof(int32_t))
        memcpy(&tv[0], st.threshold, size * sizeof(int32_t))
        memcpy(&lv[0], st.left, size * sizeof(int32_t))
        memcpy(&rv[0], st.right, size * sizeof(int32_t))
        memcpy(&cv[0, 0], st.counts, size * n_classes * sizeof(int64_t))
    free(st.feature); free(st.threshold); free(st.left); free(st.right); free(st.counts)
    return feature, threshold, left, right, counts


def predict_tree(feature, threshold, left, right, leaf_class, X):
    cdef const int32_t[::1] fv = np.ascontiguousarray(feature, dtype=np.int32)
    cdef const int64_t[::1] tv = np.ascontiguousarray(threshold, dtype=np.int64)
    cdef const int32_t[::1] lv = np.ascontiguousarray(left, dtype=np.int32)
    cdef const int32_t[::1] rv = np.ascontiguousarray(right, dtype=np.int32)
    cdef const int32_t[::1] cv = np.ascontiguousarray(leaf_class, dtype=np.int32)
    cdef const int64_t[:, ::1] x = np.ascontiguousarray(X, dtype=np.int64)
    cdef Py_ssize_t n = x.shape[0], i
    cdef int32_t node
    out = np.empty(n, dtype=np.int32)
    cdef int32_t[::1] ov = out
    with nogil:
        for i in range(n):
            node = 0
            while fv[node] >= 0:
                if x[i, fv[node]] <= tv[node]:
                    node = lv[node]
                else:
                    node = rv[node]
            ov[i] = cv[node]
    return out


def tsne_forces_rows(const double[:, ::1] P, const double[:, ::1] Y, double exaggeration,
                     Py_ssize_t start, Py_ssize_t stop, double[:, ::1] attr,
                     double[:, ::1] rep, double[::1] wsum):
    cdef Py_ssize_t n = Y.shape[0], d = Y.shape[1], i, j, t
    cdef double sq, diff, w, acc, pw, ww
    cdef double ga[8]
    cdef double gr[8]
    cdef double df[8]
    if d > 8:
        raise ValueError("embedding dimension above 8 is not supported")
    with nogil:
        for i in range(start, stop):
            acc = 0.0
            for t in range(d):
                ga[t] = 0.0
                gr[t] = 0.0
            for j in range(n):
                if j == i:
                    continue
                sq = 0.0
                for t in range(d):
                    df[t] = Y[i, t] - Y[j, t]
                    sq = sq + df[t] * df[t]
                w = 1.0 / (1.0 + sq)
                acc = acc + w
                pw = exaggeration * P[i, j] * w
                ww = w * w
                for t in range(d):
                    ga[t] = ga[t] + pw * df[t]
                    gr[t] = gr[t] + ww * df[t]
            wsum[i] = acc
            for t in range(d):
                attr[i, t] = ga[t]
                rep[i, t] = gr[t]


def tsne_kl_rows(const double[:, ::1] P, const double[:, ::1] Y, double Z,
                 Py_ssize_t start, Py_ssize_t stop, double[::1] out):
    cdef Py_ssize_t n = Y.shape[0], d = Y.shape[1], i, j, t
    cdef double acc, sq, diff, w, p
    with nogil:
        for i in range(start, stop):
            acc = 0.0
            for j in range(n):
                p = P[i, j]
                if j == i or p <= 0.0:
                    continue
                sq = 0.0
                for t in range(d):
                    diff = Y[i, t] - Y[j, t]
                    sq = sq + diff * diff
                w = 1.0 / (1.0 + sq)
                acc = acc + p * log(p * Z / w)
            out[i] = acc
