"""Time the compiled kernels against the pure-Python fallback.

Usage: python benchmarks/bench_kernels.py [--n-matrix 300] [--repeat 3]

Each kernel runs on the same seeded inputs under both backends; outputs are
compared before timings are reported, so a speedup is only printed for
backends that agree.
"""

from __future__ import annotations

import argparse
import time

import numpy as np

from likertmine.kernels import available_backends, get_backend
from likertmine.synth import GeneratorSpec, generate_survey
from likertmine.forest import rank_encode


def best_of(fn, repeat):
    times = []
    out = None
    for _ in range(repeat):
        t0 = time.perf_counter()
        out = fn()
        times.append(time.perf_counter() - t0)
    return min(times), out


def cases(args):
    ds = generate_survey(GeneratorSpec(n=max(args.n_matrix, args.n_tree), seed=1))
    X = np.ascontiguousarray(ds.likert_matrix[: args.n_matrix])
    ranks, _ = rank_encode(ds.profile_matrix[: args.n_tree])
    y = (ds.planted_labels[: args.n_tree] - 1).astype(np.int32)
    boot = np.random.default_rng(0).integers(0, args.n_tree, args.n_tree)
    rng = np.random.default_rng(2)
    P = rng.random((args.n_tsne, args.n_tsne))
    P = P + P.T
    np.fill_diagonal(P, 0.0)
    P /= P.sum()
    Y = rng.normal(size=(args.n_tsne, 2))

    def composite(k):
        out = np.zeros((X.shape[0], X.shape[0]))
        k.pairwise_dissimilarity(X, 2, 0, X.shape[0], out)
        return out

    def tree(k):
        return k.build_tree(ranks, y, boot, 3, 4, 1, -1, 12345)[0]

    def forces(k):
        n = Y.shape[0]
        attr, rep, w = np.zeros((n, 2)), np.zeros((n, 2)), np.zeros(n)
        k.tsne_forces_rows(P, Y, 1.0, 0, n, attr, rep, w)
        return np.concatenate([attr.ravel(), rep.ravel(), w])

    return [
        (f"composite matrix n={args.n_matrix}", composite),
        (f"CART tree n={args.n_tree}", tree),
        (f"t-SNE forces n={args.n_tsne}", forces),
    ]


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--n-matrix", type=int, default=300)
    ap.add_argument("--n-tree", type=int, default=3000)
    ap.add_argument("--n-tsne", type=int, default=500)
    ap.add_argument("--repeat", type=int, default=3)
    args = ap.parse_args(argv)

    backends = available_backends()
    print(f"backends: {', '.join(backends)}")
    print(f"{'kernel':28s}" + "".join(f"{b:>12s}" for b in backends) + ("   speedup" if len(backends) == 2 else ""))
    for name, fn in cases(args):
        results = {b: best_of(lambda: fn(get_backend(b)), args.repeat) for b in backends}
        row = f"{name:28s}" + "".join(f"{results[b][0]:11.4f}s" for b in backends)
        if len(backends) == 2:
            a, b = (results[x][1] for x in backends)
            agree = np.allclose(a, b, rtol=1e-12, atol=1e-12)
            row += f"  {results['python'][0] / results['compiled'][0]:7.1f}x" if agree else "  MISMATCH"
        print(row)


if __name__ == "__main__":
    main()
