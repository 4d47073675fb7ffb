import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from likertmine.clustering import CLASSIC, MEDOID, ClusterConfig
from likertmine.errors import DataError
from likertmine.similarity import DissimilarityMatrix, dissimilarity_matrix
from likertmine.synth import generate_survey, two_class_spec
from likertmine.validation import select_k, silhouette

from oracles import silhouette_oracle


def test_perfect_separation_scores_one():
    D = np.array([[0, 0, 9, 9], [0, 0, 9, 9], [9, 9, 0, 0], [9, 9, 0, 0]], float)
    r = silhouette(D, [0, 0, 1, 1])
    assert r.per_sample.tolist() == [1.0] * 4
    assert r.overall_mean == 1.0


def test_singleton_scores_zero():
    D = np.array([[0, 1, 5], [1, 0, 5], [5, 5, 0]], float)
    assert silhouette(D, [0, 0, 1]).per_sample[2] == 0.0


def test_six_point_hand_built_matrix():
    D = np.array(
        [
            [0, 1, 2, 6, 7, 8],
            [1, 0, 1, 5, 6, 7],
            [2, 1, 0, 4, 5, 6],
            [6, 5, 4, 0, 3, 2],
            [7, 6, 5, 3, 0, 1],
            [8, 7, 6, 2, 1, 0],
        ],
        float,
    )
    labels = [0, 0, 0, 1, 1, 1]
    r = silhouette(D, labels)
    # Point 0 by hand: a = (1 + 2) / 2, b = (6 + 7 + 8) / 3.
    assert r.per_sample[0] == pytest.approx((7 - 1.5) / 7, abs=1e-15)
    assert r.per_sample.tolist() == pytest.approx(silhouette_oracle(D.tolist(), labels), abs=1e-15)
    assert r.overall_mean == pytest.approx(np.mean(r.per_sample))


def test_needs_two_clusters():
    with pytest.raises(DataError):
        silhouette(np.zeros((3, 3)), [0, 0, 0])


@settings(max_examples=50, deadline=None)
@given(st.integers(0, 2**31), st.floats(0.01, 100))
def test_scale_invariance_and_range(seed, c):
    r = np.random.default_rng(seed)
    X = r.integers(1, 6, (12, 15))
    labels = np.arange(12) % 3
    D = dissimilarity_matrix(X, "composite")
    a = silhouette(D, labels)
    b = silhouette(D.scaled(c), labels)
    assert np.allclose(a.per_sample, b.per_sample, rtol=1e-12, atol=1e-12)
    assert ((a.per_sample >= -1) & (a.per_sample <= 1)).all()
    assert a.per_sample.tolist() == pytest.approx(silhouette_oracle(D.values.tolist(), labels.tolist()), abs=1e-12)


@pytest.mark.parametrize("mode", [CLASSIC, MEDOID])
def test_select_three_on_planted(synth600, mode):
    r = select_k(synth600, [2, 3], ClusterConfig(k=2, metric_mode=mode))
    assert r.best_k == 3
    assert r.silhouettes[3].overall_mean > r.silhouettes[2].overall_mean


def test_select_two_on_two_class_data():
    ds = generate_survey(two_class_spec(n=600, seed=4))
    assert select_k(ds, [2, 3], ClusterConfig(k=2)).best_k == 2


def test_single_candidate():
    ds = generate_survey(two_class_spec(n=100, seed=4))
    r = select_k(ds, [2], ClusterConfig(k=2))
    assert r.best_k == 2 and list(r.silhouettes) == [2]


def test_select_k_deterministic(synth600):
    cfg = ClusterConfig(k=2, seed=5)
    a = select_k(synth600, [2, 3], cfg)
    b = select_k(synth600, [2, 3], cfg)
    assert a.silhouettes[3].overall_mean == b.silhouettes[3].overall_mean


def test_matrix_metric_must_match_mode(synth600):
    D = DissimilarityMatrix(np.zeros((600, 600)), "euclidean")
    with pytest.raises(ValueError):
        select_k(synth600, [2], ClusterConfig(k=2, metric_mode=MEDOID), matrix=D)
