"""End-to-end acceptance checks, one test per criterion.

Each test prints a single ``ACn PASS|FAIL`` line; the lines are also
collected and repeated in the terminal summary.
"""

import itertools
import subprocess
import sys
import time

import numpy as np
import pytest

from likertmine.clustering import CLASSIC, MEDOID, ClusterConfig, kmeans_fit
from likertmine.forest import ForestConfig, permutation_importance, predict_labels, train_forest
from likertmine.similarity import combined_dissimilarity, dissimilarity_matrix, levenshtein
from likertmine.survey import cronbach_alpha, make_dataset
from likertmine.synth import PLANTED_ORDER, GeneratorSpec, generate_survey, planted_effects
from likertmine.tsne import (
    conditional_affinities,
    squared_distances,
    tsne_affinities,
    tsne_gradient,
)
from likertmine.validation import adjusted_rand_index, select_k, silhouette

from oracles import all_sequences, edit_distance_recursive, entropy_perplexity, kl_mp

ACCEPTANCE_LINES: list[str] = []


def report(tag, ok, detail):
    line = f"{tag} {'PASS' if ok else 'FAIL'}: {detail}"
    ACCEPTANCE_LINES.append(line)
    print(line)
    assert ok, line


def test_ac1_edit_distance_exhaustive():
    t0 = time.perf_counter()
    seqs = list(all_sequences((1, 2, 3), 5))
    mismatches = sum(
        levenshtein(a, b) != edit_distance_recursive(a, b) for a, b in itertools.product(seqs, repeat=2)
    )
    dt = time.perf_counter() - t0
    report("AC1", mismatches == 0 and dt < 60, f"{len(seqs)}^2 pairs, {mismatches} mismatches, {dt:.1f}s")


def test_ac2_composite_properties():
    r = np.random.default_rng(2024)
    a = r.integers(1, 6, (10_000, 15))
    b = r.integers(1, 6, (10_000, 15))
    # Make every tenth pair identical, and perturb one item in the next one.
    b[::10] = a[::10]
    b[1::10] = a[1::10]
    b[1::10, 7] = np.where(a[1::10, 7] == 5, 4, a[1::10, 7] + 1)
    failures = 0
    for x, y in zip(a, b):
        s, t = combined_dissimilarity(x, y), combined_dissimilarity(y, x)
        equal = bool(np.array_equal(x, y))
        if s != t or s < 0 or (s == 0) != equal:
            failures += 1
    report("AC2", failures == 0, f"10000 pairs ({(a == b).all(axis=1).sum()} identical), {failures} failures")


def test_ac3_lloyd_monotone(synth600):
    X = synth600.likert_matrix
    composite = dissimilarity_matrix(X, "composite")
    worst, unconverged = -np.inf, 0
    runs = list(itertools.product((CLASSIC, MEDOID), (2, 3, 5), range(9)))[:50]
    for mode, k, seed in runs:
        m = kmeans_fit(X, ClusterConfig(k=k, metric_mode=mode, seed=seed), matrix=composite if mode == MEDOID else None)
        h = np.asarray(m.objective_history)
        if h.size > 1:
            worst = max(worst, float(np.max(h[1:] - h[:-1])))
        unconverged += not m.converged or m.iterations >= 300
    ok = len(runs) == 50 and worst <= 1e-9 and unconverged == 0
    report("AC3", ok, f"{len(runs)} fits, largest objective increase {worst:.3g}, {unconverged} unconverged")


def test_ac4_planted_recovery(synth600):
    t0 = time.perf_counter()
    m = kmeans_fit(synth600.likert_matrix, ClusterConfig(k=3, metric_mode=CLASSIC, seed=0))
    ari = adjusted_rand_index(m.assignments, synth600.planted_labels)
    dt = time.perf_counter() - t0
    report("AC4", ari >= 0.9 and dt < 10, f"ARI {ari:.4f}, {dt:.2f}s")


def test_ac5_three_beats_two(synth3000):
    t0 = time.perf_counter()
    X = synth3000.likert_matrix
    matrix = dissimilarity_matrix(X, "composite")
    sel = select_k(X, (2, 3), ClusterConfig(k=2, metric_mode=MEDOID, seed=0), matrix=matrix)
    dt = time.perf_counter() - t0
    s2, s3 = sel.silhouettes[2].overall_mean, sel.silhouettes[3].overall_mean
    ok = s3 >= 0.8 and s3 > s2 and sel.best_k == 3 and dt < 120
    report("AC5", ok, f"silhouette k=3 {s3:.4f}, k=2 {s2:.4f}, select_k {sel.best_k}, {dt:.1f}s")


def test_ac6_tsne_numerics():
    r = np.random.default_rng(9)
    X = r.normal(size=(20, 5))
    P = tsne_affinities(X, 5)
    total_err = abs(P.sum() - 1)
    symmetric = bool(np.array_equal(P, P.T))
    cond = conditional_affinities(squared_distances(X), 5.0)
    perp_err = max(abs(entropy_perplexity(row) - 5.0) for row in cond)
    Y = r.normal(size=(20, 2))
    grad = tsne_gradient(P, Y)
    h = 1e-5
    fd = np.zeros_like(Y)
    for i in range(20):
        for d in range(2):
            Yp, Ym = Y.copy(), Y.copy()
            Yp[i, d] += h
            Ym[i, d] -= h
            fd[i, d] = float((kl_mp(P, Yp) - kl_mp(P, Ym)) / (2 * h))
    rel = float((np.abs(grad - fd) / np.maximum(np.abs(fd), 1e-12)).max())
    ok = total_err <= 1e-9 and symmetric and perp_err < 1e-3 and rel < 1e-4
    report("AC6", ok, f"|sum-1| {total_err:.2g}, symmetric {symmetric}, perplexity err {perp_err:.2g}, gradient rel err {rel:.2g}")


def _planted_rule(n, seed):
    r = np.random.default_rng(seed)
    x1, x2 = r.integers(1, 11, n), r.integers(1, 11, n)
    return np.column_stack([x1, x2, np.full(n, 4)]), np.where(x1 <= 5, 1, 2)


def test_ac7_forest_sanity():
    cfg = ForestConfig(mtry=2, ntree=50, seed=5)
    X, y = _planted_rule(200, 5)
    small = train_forest(X, y, cfg)
    Xb, yb = _planted_rule(2000, 5)
    Xh, yh = _planted_rule(2000, 6)
    big = train_forest(Xb, yb, cfg)
    holdout = float(np.mean(predict_labels(big, Xh) != yh))
    imp = permutation_importance(small, X, y, seed=5)
    const = float(imp.mdeca[2])
    ok = small.oob_error <= 0.05 and abs(big.oob_error - holdout) <= 0.05 and const == 0.0
    report("AC7", ok, f"OOB n=200 {small.oob_error:.3f}, n=2000 OOB {big.oob_error:.3f} vs holdout {holdout:.3f}, constant MDecA {const}")


@pytest.mark.slow
def test_ac8_importance_ranking():
    t0 = time.perf_counter()
    hits = 0
    for s in range(20):
        ds = generate_survey(GeneratorSpec(n=3000, seed=1000 + s, attribute_effects=planted_effects()))
        model = train_forest(ds.profile_matrix, ds.planted_labels, ForestConfig(mtry=4, ntree=500, seed=s))
        imp = permutation_importance(model, ds.profile_matrix, ds.planted_labels, seed=s)
        hits += tuple(imp.ranking[:4]) == PLANTED_ORDER
    dt = time.perf_counter() - t0
    report("AC8", hits >= 18 and dt < 300, f"top-4 order recovered in {hits}/20 runs, {dt:.0f}s")


@pytest.mark.slow
def test_ac9_pipeline_threads_identical(tmp_path):
    outs = []
    for threads in (1, 8):
        out = tmp_path / f"t{threads}"
        cmd = [sys.executable, "-m", "likertmine", "pipeline", "--synth-seed", "42", "--threads", str(threads), "--out", str(out)]
        proc = subprocess.run(cmd, capture_output=True, text=True)
        assert proc.returncode == 0, proc.stderr
        outs.append((out / "report.json").read_bytes())
    report("AC9", outs[0] == outs[1], f"report.json {len(outs[0])} bytes, identical {outs[0] == outs[1]}")


def test_ac10_cronbach():
    levels = np.random.default_rng(3).integers(1, 6, 200)
    correlated = make_dataset([[int(v)] * 15 for v in levels])
    a1 = cronbach_alpha(correlated)
    a2 = cronbach_alpha(np.random.default_rng(7).integers(1, 6, (500, 15)))
    report("AC10", a1 == 1.0 and abs(a2) <= 0.1, f"correlated alpha {a1!r}, independent alpha {a2:.4f}")
