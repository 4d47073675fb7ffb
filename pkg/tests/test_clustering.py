import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from likertmine.clustering import (
    CLASSIC,
    HIGH_IS_STRONG,
    LOW_IS_STRONG,
    MEDOID,
    ClusterConfig,
    ClusterModel,
    EmptyClusterError,
    assign,
    kmeans_fit,
    label_clusters,
    model_objective,
    update_centroids,
)
from likertmine.errors import ConfigError, DataError
from likertmine.similarity import combined_dissimilarity, dissimilarity_matrix
from likertmine.validation import adjusted_rand_index

from oracles import ari_oracle


def fake_model(profiles, k=None):
    profiles = np.asarray(profiles, dtype=float)
    k = k or profiles.shape[0]
    return ClusterModel(
        config=ClusterConfig(k=k),
        centroids=profiles,
        profiles=profiles,
        assignments=np.arange(k),
        objective=0.0,
        iterations=1,
        converged=True,
    )


def test_assign_single_centroid():
    assert assign([3] * 15, [[1.0] * 15]) == 0
    assert assign([5] * 15, [[1.0] * 15], MEDOID) == 0


def test_assign_exact_match():
    cents = [[1] * 15, [3] * 15, [5] * 15]
    assert assign([5] * 15, cents) == 2
    assert assign([5] * 15, cents, MEDOID) == 2


@pytest.mark.parametrize("mode", [CLASSIC, MEDOID])
def test_assign_tie_goes_to_lowest_index(mode):
    point = [3] * 15
    c0, c1 = [2] + [3] * 14, [4] + [3] * 14
    if mode == CLASSIC:
        assert np.sum((np.array(point) - c0) ** 2) == np.sum((np.array(point) - c1) ** 2)
    else:
        assert combined_dissimilarity(point, c0) == combined_dissimilarity(point, c1)
    assert assign(point, [c0, c1], mode) == 0
    assert assign(point, [c1, c0], mode) == 0


def test_update_mean_and_singletons():
    X = np.array([[1] * 15, [3] * 15, [5] * 15])
    cents = update_centroids(X, [0, 0, 1], CLASSIC)
    assert cents[0].tolist() == [2.0] * 15
    assert cents[1].tolist() == [5.0] * 15
    assert update_centroids(X, [0, 0, 1], MEDOID)[1] == 2


def test_update_empty_cluster_signalled():
    with pytest.raises(EmptyClusterError):
        update_centroids(np.ones((3, 15), int), [0, 0, 2], CLASSIC, k=3)


def test_medoid_matches_bruteforce_seed_3():
    X = np.random.default_rng(3).integers(1, 6, (5, 15))
    brute = min(range(5), key=lambda i: (sum(combined_dissimilarity(X[i], X[j]) for j in range(5)), i))
    assert update_centroids(X, [0] * 5, MEDOID)[0] == brute


def test_k_equals_one(synth600):
    m = kmeans_fit(synth600, ClusterConfig(k=1, n_init=1))
    assert (m.assignments == 0).all()
    assert np.allclose(m.centroids[0], synth600.likert_matrix.mean(axis=0))
    assert m.iterations <= 2 and m.converged


def test_k_equals_n_distinct_records():
    X = np.unique(np.random.default_rng(1).integers(1, 6, (12, 15)), axis=0)
    m = kmeans_fit(X, ClusterConfig(k=X.shape[0], n_init=1))
    assert m.objective == 0.0
    assert sorted(m.sizes) == [1] * X.shape[0]


def test_k_greater_than_n():
    with pytest.raises(DataError, match="k > n"):
        kmeans_fit(np.ones((1, 15), int), ClusterConfig(k=2))


def test_config_validation():
    with pytest.raises(ConfigError):
        ClusterConfig(k=0)
    with pytest.raises(ConfigError):
        ClusterConfig(k=2, metric_mode="manhattan")
    with pytest.raises(ConfigError):
        ClusterConfig(k=2, init="sorted")


def test_planted_recovery_classic(synth600):
    m = kmeans_fit(synth600, ClusterConfig(k=3, seed=0))
    ari = adjusted_rand_index(synth600.planted_labels, m.assignments)
    assert ari >= 0.9


def test_ari_against_pair_counting_oracle():
    r = np.random.default_rng(6)
    for _ in range(5):
        x, y = r.integers(0, 3, 40), r.integers(0, 4, 40)
        assert adjusted_rand_index(x, y) == pytest.approx(ari_oracle(x.tolist(), y.tolist()), abs=1e-12)
    assert adjusted_rand_index([0, 0, 1, 1], [5, 5, 2, 2]) == 1.0


@pytest.mark.parametrize("mode", [CLASSIC, MEDOID])
@pytest.mark.parametrize("init", ["random_points", "kmeans_pp"])
def test_fit_invariants(synth600, mode, init):
    X = synth600.likert_matrix[:200]
    S = dissimilarity_matrix(X, "composite") if mode == MEDOID else None
    cfg = ClusterConfig(k=3, metric_mode=mode, seed=11, init=init, n_init=2)
    m = kmeans_fit(X, cfg, matrix=S)
    h = np.array(m.objective_history)
    assert (np.diff(h) <= 1e-9).all()
    assert m.converged
    assert min(m.sizes) > 0
    assert m.objective == pytest.approx(model_objective(m, X, S), rel=1e-12)
    again = kmeans_fit(X, cfg, matrix=S)
    assert np.array_equal(m.assignments, again.assignments)
    # One more assign/update step changes nothing at convergence.
    cents = update_centroids(X, m.assignments, mode, k=3, matrix=S)
    if mode == CLASSIC:
        d = ((X[:, None, :] - cents[None]) ** 2).sum(axis=2)
    else:
        d = S.values[:, cents]
    assert np.array_equal(np.argmin(d, axis=1), m.assignments)


def test_medoid_mode_thread_independent(synth600):
    X = synth600.likert_matrix[:150]
    cfg = ClusterConfig(k=3, metric_mode=MEDOID, seed=2, n_init=2)
    a = kmeans_fit(X, cfg, threads=1)
    b = kmeans_fit(X, cfg, threads=3)
    assert np.array_equal(a.assignments, b.assignments) and a.objective == b.objective


def test_model_roundtrip(synth600):
    m = label_clusters(kmeans_fit(synth600.likert_matrix[:100], ClusterConfig(k=3, n_init=1)))
    back = ClusterModel.from_dict(m.to_dict())
    assert back.to_dict() == m.to_dict()


def test_labels_low_is_strong():
    m = label_clusters(fake_model([[1.4] * 15, [2.9] * 15, [4.4] * 15]), LOW_IS_STRONG)
    assert m.labels == {0: "Strong", 1: "Neutral", 2: "NotStrong"}


def test_labels_high_is_strong():
    m = label_clusters(fake_model([[1.4] * 15, [2.9] * 15, [4.4] * 15]), HIGH_IS_STRONG)
    assert m.labels == {0: "NotStrong", 1: "Neutral", 2: "Strong"}


def test_labels_tie_lowest_index_stronger():
    # Mirrored profiles with the same mean score.
    a = [1.0] * 7 + [5.0] * 7 + [3.0]
    b = a[::-1]
    assert np.mean(a) == np.mean(b)
    for polarity in (LOW_IS_STRONG, HIGH_IS_STRONG):
        m = label_clusters(fake_model([a, b]), polarity)
        assert m.labels == {0: "Strong", 1: "NotStrong"}


def test_labels_skipped_for_other_k():
    with pytest.warns(UserWarning):
        m = label_clusters(fake_model([[1.0] * 15] * 4))
    assert m.labels is None and m.label_warning


@settings(max_examples=30, deadline=None)
@given(st.permutations([0, 1, 2]))
def test_labels_follow_means_not_indices(perm):
    means = [1.4, 2.9, 4.4]
    m = label_clusters(fake_model([[means[p]] * 15 for p in perm]))
    names = {1.4: "Strong", 2.9: "Neutral", 4.4: "NotStrong"}
    assert all(m.labels[j] == names[means[p]] for j, p in enumerate(perm))
