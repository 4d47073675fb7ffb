import numpy as np
import pytest

from likertmine.errors import ConfigError
from likertmine.survey import ATTRIBUTE_NAMES, ATTRIBUTE_RANGES, dataset_to_csv
from likertmine.synth import (
    PLANTED_ORDER,
    GeneratorSpec,
    attribute_distribution,
    class_mode,
    generate_survey,
    planted_effects,
)

CHI2_99 = {1: 6.635, 2: 9.210, 4: 13.277, 6: 16.812, 8: 20.090, 10: 23.209, 12: 26.217, 26: 45.642}


def test_zero_noise_single_class():
    ds = generate_survey(GeneratorSpec(n=20, class_proportions=(1, 0, 0), class_item_means=(2.0, 3.0, 4.0), noise_sigma=0))
    assert (ds.likert_matrix == 2).all()


def test_degenerate_mixture_labels():
    ds = generate_survey(GeneratorSpec(n=100, class_proportions=(1, 0, 0)))
    assert (ds.planted_labels == 1).all()


def test_default_spec_law_of_large_numbers():
    spec = GeneratorSpec()
    ds = generate_survey(spec)
    labels = ds.planted_labels
    for c, p in enumerate(spec.class_proportions):
        assert abs(np.mean(labels == c + 1) - p) <= 0.03
        means = ds.likert_matrix[labels == c + 1].mean(axis=0)
        assert np.abs(means - np.array(spec.class_item_means[c])).max() <= 0.1


def test_same_seed_same_bytes_other_seed_differs():
    a = dataset_to_csv(generate_survey(GeneratorSpec(n=200, seed=1)))
    b = dataset_to_csv(generate_survey(GeneratorSpec(n=200, seed=1)))
    c = dataset_to_csv(generate_survey(GeneratorSpec(n=200, seed=2)))
    assert a == b and a != c


@pytest.mark.parametrize(
    "kw, field",
    [
        (dict(n=0), "n"),
        (dict(class_proportions=(0.5, 0.5, 0.5)), "class_proportions"),
        (dict(class_proportions=(0.5, 0.5)), "class_proportions"),
        (dict(class_item_means=(0.5, 3, 4)), "class_item_means"),
        (dict(noise_sigma=-1), "noise_sigma"),
        (dict(attribute_effects={"shoe_size": 1}), "attribute_effects"),
        (dict(attribute_effects={"career": -1}), "attribute_effects"),
        (dict(attribute_sampling="sobol"), "attribute_sampling"),
        (dict(seed=-1), "seed"),
    ],
)
def test_invalid_spec_names_field(kw, field):
    with pytest.raises(ConfigError, match=field):
        GeneratorSpec(**kw)


def chi_square(table):
    table = np.asarray(table, float)
    expected = table.sum(axis=1, keepdims=True) * table.sum(axis=0, keepdims=True) / table.sum()
    keep = expected > 0
    return float((((table - expected) ** 2)[keep] / expected[keep]).sum())


@pytest.mark.parametrize("sampling", ["systematic", "iid"])
def test_zero_effects_give_independence(sampling):
    spec = GeneratorSpec(n=5000, attribute_effects={}, seed=13, attribute_sampling=sampling)
    ds = generate_survey(spec)
    labels = ds.planted_labels
    for j, name in enumerate(ATTRIBUTE_NAMES):
        lo, hi = ATTRIBUTE_RANGES[name]
        table = [[np.sum((labels == c) & (ds.profile_matrix[:, j] == v)) for v in range(lo, hi + 1)] for c in (1, 2, 3)]
        dof = 2 * (hi - lo)
        assert chi_square(table) < CHI2_99[dof], name


def test_class_modes_span_the_codes():
    assert [class_mode(5, c) for c in range(3)] == [1, 3, 5]
    assert [class_mode(14, c) for c in range(3)] == [1, 8, 14]
    assert [class_mode(2, c) for c in range(3)] == [1, 2, 2]


def test_attribute_distribution_is_a_tilt():
    p = attribute_distribution("kids", 0, 0.4)
    assert p.sum() == pytest.approx(1.0)
    assert p[0] == pytest.approx(0.4 + 0.6 / 5)
    assert np.allclose(attribute_distribution("kids", 2, 0.0), 0.2)


def test_systematic_counts_track_expectation():
    spec = GeneratorSpec(n=3000, seed=8)
    ds = generate_survey(spec)
    labels = ds.planted_labels
    j = ATTRIBUTE_NAMES.index("time")
    for c in range(3):
        rows = labels == c + 1
        m = rows.sum()
        expected = attribute_distribution("time", c, spec.attribute_effects["time"]) * m
        observed = np.bincount(ds.profile_matrix[rows, j], minlength=6)[1:]
        assert np.abs(observed - expected).max() <= 1.0 + 1e-9


def test_planted_effect_order():
    eff = planted_effects()
    top = sorted(eff, key=lambda a: -eff[a])[:4]
    assert tuple(top) == PLANTED_ORDER
    assert max(v for k, v in eff.items() if k not in PLANTED_ORDER) < min(eff[k] for k in PLANTED_ORDER) / 10
