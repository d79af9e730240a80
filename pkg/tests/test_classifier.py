"""Locally weighted classifier: weights, thresholds, normalization, regions."""

import numpy as np
import pytest

import banglearn as bl
from banglearn.classifier import (
    Classifier,
    decision_region_grid,
    fit_normalizer,
    identity_normalizer,
)
from banglearn.training import TrainingSet


def make_set(samples, labels, algorithm=1, u_on=4.0):
    return TrainingSet(samples=np.asarray(samples, dtype=float),
                       labels=np.asarray(labels, dtype=float),
                       algorithm=algorithm, u_on=u_on, probe_dt=1e-3)


def make_classifier(samples, labels, tau, algorithm=1, u_on=4.0):
    ts = make_set(samples, labels, algorithm, u_on)
    return Classifier(ts, tau, identity_normalizer(ts.dimension))


# ---------------------------------------------------------------------------
# Normalizer
# ---------------------------------------------------------------------------

def test_fit_normalizer_std():
    ts = make_set([[0.0], [2.0]], [4.0, 0.0])
    norm = fit_normalizer(ts, mode="std")
    assert norm.mean[0] == 1.0 and norm.scale[0] == 1.0
    assert norm([2.0])[0] == 1.0
    normalized = norm(ts.samples)
    assert np.allclose(normalized.mean(axis=0), 0.0)
    assert np.allclose(normalized.std(axis=0), 1.0)


def test_fit_normalizer_variance_verbatim():
    ts = make_set([[0.0], [4.0]], [4.0, 0.0])
    norm = fit_normalizer(ts, mode="variance_verbatim")
    assert norm.scale[0] == 4.0  # variance of {0, 4}
    assert np.allclose(norm(ts.samples).mean(axis=0), 0.0)


def test_fit_normalizer_identity_and_errors():
    ts = make_set([[0.0, 1.0], [2.0, 1.0]], [4.0, 0.0])
    norm = fit_normalizer(ts, mode="identity")
    assert np.array_equal(norm([5.0, -3.0]), [5.0, -3.0])
    with pytest.raises(ValueError, match="dimension"):
        fit_normalizer(ts, mode="std")  # second dimension has zero spread
    with pytest.raises(ValueError):
        fit_normalizer(make_set([[0.0]], [4.0]), mode="std")
    with pytest.raises(ValueError):
        fit_normalizer(ts, mode="gauss")


# ---------------------------------------------------------------------------
# Weights
# ---------------------------------------------------------------------------

def test_weights_single_sample():
    c = make_classifier([[0.0]], [4.0], tau=0.5)
    assert np.array_equal(c.weights([3.0]), [1.0])


def test_weights_symmetry():
    c = make_classifier([[-1.0], [1.0]], [4.0, 0.0], tau=0.5)
    assert np.array_equal(c.weights([0.0]), [0.5, 0.5])


def test_weights_exponential_values():
    c = make_classifier([[0.0], [1.0], [2.0]], [4.0, 0.0, 0.0], tau=0.5)
    w = c.weights([0.0])
    raw = np.array([1.0, np.exp(-1.0), np.exp(-4.0)])
    assert np.allclose(w, raw / raw.sum(), atol=1e-12)
    assert np.allclose(w, [0.7214, 0.2654, 0.0132], atol=5e-4)


def test_weights_normalized_over_random_queries():
    rng = np.random.default_rng(1)
    c = make_classifier(rng.normal(size=(40, 3)), rng.choice([0.0, 4.0], 40), tau=0.3)
    queries = rng.normal(size=(1000, 3))
    sums = c.weights(queries).sum(axis=-1)
    assert np.max(np.abs(sums - 1.0)) < 1e-12


def test_weights_locality_monotonicity():
    samples = np.array([[0.0, 0.0], [2.0, 0.0], [0.0, 2.0]])
    c = make_classifier(samples, [4.0, 0.0, 0.0], tau=0.5)
    approach = np.linspace(1.5, 0.0, 25)
    w0 = [c.weights([a, 0.5])[0] for a in approach]
    assert np.all(np.diff(w0) >= -1e-15)


def test_weights_translation_equivariance():
    rng = np.random.default_rng(5)
    samples = rng.normal(size=(20, 2))
    labels = rng.choice([0.0, 4.0], 20)
    shift = np.array([13.7, -4.1])
    a = make_classifier(samples, labels, tau=0.4)
    b = make_classifier(samples + shift, labels, tau=0.4)
    for _ in range(20):
        q = rng.normal(size=2)
        # identical up to roundoff of the shifted subtractions
        assert np.allclose(a.weights(q), b.weights(q + shift), atol=1e-12)
        assert a.classify(q) == b.classify(q + shift)


def test_weights_underflow_falls_back_to_nearest():
    c = make_classifier([[0.0], [1.0]], [4.0, 0.0], tau=1e-4)
    # both raw weights underflow at this distance; nearest sample wins
    w = c.weights([100.0])
    assert np.array_equal(w, [0.0, 1.0])
    assert c.classify([100.0]) == 0.0
    assert c.classify([-100.0]) == 4.0


# ---------------------------------------------------------------------------
# Classification thresholds
# ---------------------------------------------------------------------------

def test_classify_all_on_labels():
    c = make_classifier([[0.0], [1.0]], [4.0, 4.0], tau=0.5)
    for q in (-3.0, 0.0, 0.5, 10.0):
        assert c.classify([q]) == 4.0


def test_classify_algorithm1_tie_is_off():
    c = make_classifier([[-1.0], [1.0]], [4.0, 0.0], tau=0.5, algorithm=1)
    # equidistant query: weighted sum is exactly 0.5*u1; strict > fails
    assert c.classify([0.0]) == 0.0


def test_classify_algorithm2_tie_is_negative():
    c = make_classifier([[-1.0], [1.0]], [2.0, -2.0], tau=0.5, algorithm=2, u_on=2.0)
    assert c.classify([0.0]) == -2.0


def test_classify_threshold_by_algorithm():
    ts1 = make_set([[0.0]], [4.0], algorithm=1)
    assert Classifier(ts1, 0.1, identity_normalizer(1)).threshold == 2.0
    ts2 = make_set([[0.0]], [4.0], algorithm=2)
    assert Classifier(ts2, 0.1, identity_normalizer(1)).threshold == 0.0


def test_classify_scaling_u1_invariance():
    rng = np.random.default_rng(8)
    samples = rng.normal(size=(30, 2))
    on = rng.random(30) < 0.4
    a = make_classifier(samples, np.where(on, 1.0, 0.0), tau=0.3, u_on=1.0)
    b = make_classifier(samples, np.where(on, 10.0, 0.0), tau=0.3, u_on=10.0)
    queries = rng.normal(size=(200, 2))
    assert np.array_equal(a.classify(queries) > 0, b.classify(queries) > 0)


def test_classify_duplicating_every_sample_preserves_decision():
    rng = np.random.default_rng(9)
    samples = rng.normal(size=(15, 2))
    labels = rng.choice([0.0, 4.0], 15)
    a = make_classifier(samples, labels, tau=0.4)
    b = make_classifier(np.vstack([samples, samples]),
                        np.concatenate([labels, labels]), tau=0.4)
    queries = rng.normal(size=(100, 2))
    assert np.array_equal(a.classify(queries), b.classify(queries))


def test_classifier_requires_positive_tau():
    with pytest.raises(ValueError):
        make_classifier([[0.0]], [4.0], tau=0.0)


# ---------------------------------------------------------------------------
# Decision regions
# ---------------------------------------------------------------------------

def test_region_grid_codomain_and_training_consistency(duffing_policy):
    cfg, bundle = duffing_policy
    xs, ys, grid = decision_region_grid(bundle.classifier, cfg.box, 41)
    assert set(np.unique(grid)) <= {0.0, 4.0}
    # the classifier labels its own training data correctly; kernel
    # smoothing may override the odd isolated sample
    ts = bundle.training_set
    predicted = bundle.classifier.classify(ts.samples)
    assert np.mean(predicted == ts.labels) >= 0.95


def test_region_grid_large_tau_majority_bias():
    # 9 OFF samples vs 1 ON: large tau floods the region with the majority
    xs = np.concatenate([np.linspace(-2, -0.5, 9), [2.0]])
    samples = np.stack([xs, np.zeros(10)], axis=1)
    labels = np.array([0.0] * 9 + [4.0])
    on_area = {}
    for tau in (0.1, 10.0):
        c = make_classifier(samples, labels, tau=tau)
        _, _, grid = decision_region_grid(c, ((-3, 3), (-1, 1)), 61)
        on_area[tau] = np.mean(grid > 0)
    assert on_area[10.0] < on_area[0.1]


def test_region_csv_format(tmp_path, duffing_policy):
    cfg, bundle = duffing_policy
    from banglearn.classifier import write_region_csv
    xs, ys, grid = decision_region_grid(bundle.classifier, cfg.box, 11)
    path = tmp_path / "region.csv"
    write_region_csv(path, xs, ys, grid)
    lines = path.read_text().splitlines()
    assert lines[0] == "x,y,u"
    assert len(lines) == 1 + 11 * 11
