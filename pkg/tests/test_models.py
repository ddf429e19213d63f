import numpy as np
import pytest

from waiome.classifiers import ModelSpec, fit_model, load_model, save_model
from waiome.classifiers.networks import TrainingConfig
from waiome.grid import ParseError

SPECS = [
    ModelSpec.parse("knn", k=3),
    ModelSpec.parse("svm", kernel="rbf"),
    ModelSpec.parse("svm", kernel="poly3"),
    ModelSpec.parse("rf", n_trees=10),
    ModelSpec.parse("fnn1"),
    ModelSpec.parse("cnn2s"),
]


@pytest.mark.parametrize("spec", SPECS, ids=lambda s: f"{s.family}-{s.design}")
def test_save_load_round_trip(spec, small_cohort, tmp_path):
    model = fit_model(spec, small_cohort.images, small_cohort.labels, seed=5, training=TrainingConfig(epochs=1))
    path = save_model(model, tmp_path / "m.json")
    loaded = load_model(path)
    assert loaded == model
    a, b = model.predict(small_cohort.images), loaded.predict(small_cohort.images)
    assert np.array_equal(a[0], b[0]) and np.array_equal(a[1], b[1])


def test_refit_is_deterministic(small_cohort):
    spec = ModelSpec.parse("rf", n_trees=12)
    a = fit_model(spec, small_cohort.images, small_cohort.labels, seed=9)
    b = fit_model(spec, small_cohort.images, small_cohort.labels, seed=9)
    c = fit_model(spec, small_cohort.images, small_cohort.labels, seed=10)
    assert a == b and a != c


def test_knn_all_ome_neighbours(small_cohort):
    X = small_cohort.images
    y = np.ones(len(X), dtype=int)
    y[0] = 0
    model = fit_model(ModelSpec.parse("knn", k=1), X[1:], y[1:])
    labels, p = model.predict(X[:3])
    assert labels.tolist() == [1, 1, 1] and p.tolist() == [1.0, 1.0, 1.0]


def test_predict_accepts_flat_rows(small_cohort):
    model = fit_model(ModelSpec.parse("knn", k=3), small_cohort.images, small_cohort.labels)
    flat = small_cohort.images.reshape(len(small_cohort), -1)
    assert np.array_equal(model.predict(flat)[1], model.predict(small_cohort.images)[1])


def test_svm_probability_follows_margin(small_cohort):
    model = fit_model(ModelSpec.parse("svm", kernel="linear"), small_cohort.images, small_cohort.labels)
    labels, p = model.predict(small_cohort.images)
    m = model.scores(small_cohort.images)
    assert np.array_equal(labels == 1, m > 0)
    assert np.all(np.diff(p[np.argsort(m)]) >= 0)


@pytest.mark.parametrize("kw", [dict(name="knn", k=2), dict(name="svm", kernel="cubic"), dict(name="rf", n_trees=5),
                                dict(name="rf", n_trees=501), dict(name="cnn9"), dict(name="tree")])
def test_invalid_specs(kw):
    with pytest.raises(ValueError):
        ModelSpec.parse(**kw)


def test_spec_labels():
    assert ModelSpec.parse("svm", kernel="poly3").design == "Poly"
    assert ModelSpec.parse("rf", n_trees=100).classifier == "RF"
    spec = ModelSpec.parse("cnn2")
    assert ModelSpec.from_json(spec.to_json()) == spec and spec.stochastic and spec.is_image


def test_bad_model_file(tmp_path):
    p = tmp_path / "m.json"
    p.write_text("{not json")
    with pytest.raises(ParseError):
        load_model(p)
    p.write_text('{"format_version": 99}')
    with pytest.raises(ParseError):
        load_model(p)
