import numpy as np
import pytest
from helpers import brute_auc, random_cohort

from waiome.classifiers import ModelSpec, fit_model
from waiome.evaluation import (
    FoldError,
    confusion_metrics,
    cross_validate,
    make_folds,
    roc_auc,
    table_csv,
    weight_sweep,
)
from waiome.grid import Cohort, ValidationError
from waiome.synth import GeneratorConfig, generate_cohort


def test_fold_plan_on_default_counts():
    labels = np.array([0] * 423 + [1] * 249)
    plan = make_folds(labels, seed=7)
    sizes = [len(f) for f in plan.folds]
    assert set(sizes) <= {67, 68} and sum(sizes) == 672
    assert all(42 <= (labels[f] == 0).sum() <= 43 for f in plan.folds)
    assert np.array_equal(np.sort(np.concatenate(plan.folds)), np.arange(672))
    again = make_folds(labels, seed=7)
    assert all(np.array_equal(a, b) for a, b in zip(plan.folds, again.folds))
    assert not np.array_equal(plan.train(0), make_folds(labels, seed=8).train(0))


def test_fold_plan_small_class():
    with pytest.raises(ValidationError):
        make_folds([0] * 20 + [1] * 9, seed=0)


def test_confusion_metrics_example():
    y = [1] * 100 + [0] * 100
    pred = [1] * 70 + [0] * 30 + [1] * 10 + [0] * 90
    r = confusion_metrics(y, pred)
    assert (r.tp, r.fp, r.fn, r.tn) == (70, 10, 30, 90)
    assert r.precision_ome == 0.875 and r.recall_ome == 0.7 and r.accuracy == 0.8
    assert r.f1_ome == pytest.approx(0.7778, abs=1e-4)
    assert r.recall_normal == pytest.approx(90 / 100, abs=1e-12)


def test_confusion_perfect_and_degenerate():
    y = [0, 1, 1, 0]
    r = confusion_metrics(y, y)
    assert all(getattr(r, m) == 1.0 for m in ("precision_ome", "recall_ome", "f1_normal", "accuracy"))
    r = confusion_metrics(y, [0, 0, 0, 0])
    assert r.recall_ome == 0.0 and "recall_ome_zero" in r.flags and "precision_ome_undefined" in r.flags
    with pytest.raises(ValueError):
        confusion_metrics([0, 1], [0])


def test_auc_matches_pairwise_count(rng):
    for _ in range(50):
        n = int(rng.integers(2, 201))
        y = rng.integers(0, 2, n)
        y[:2] = [0, 1]
        s = rng.integers(0, 10, n) if rng.random() < 0.5 else rng.normal(size=n)
        assert roc_auc(y, s) == brute_auc(y, s)


def test_auc_edge_cases():
    assert roc_auc([0, 0, 1, 1], [0.1, 0.2, 0.8, 0.9]) == 1.0
    assert roc_auc([0, 1, 0, 1], [3, 3, 3, 3]) == 0.5
    with pytest.raises(ValueError):
        roc_auc([1, 1], [0.2, 0.3])


def test_auc_invariant_under_monotone_maps(rng):
    y = rng.integers(0, 2, 150)
    s = rng.normal(size=150)
    base = roc_auc(y, s)
    assert roc_auc(y, 3.5 * s - 2) == base
    assert roc_auc(y, s**3) == base


def test_knn1_on_duplicated_pairs(rng):
    base = random_cohort(rng, 12, 12)
    n = len(base)
    twin = Cohort(np.concatenate([base.images, base.images]), np.concatenate([base.labels, base.labels]))
    plan = make_folds(twin.labels, seed=0)
    # a sample whose twin sits in the training folds is always recovered
    expected_hits = 0
    for k in range(len(plan)):
        tr, te = plan.train(k), plan.test(k)
        model = fit_model(ModelSpec.parse("knn", k=1), twin.images[tr], twin.labels[tr])
        labels, _ = model.predict(twin.images[te])
        has_twin = np.isin((te + n) % (2 * n), tr)
        assert np.all(labels[has_twin] == twin.labels[te][has_twin])
        expected_hits += has_twin.sum()
    r = cross_validate(twin, ModelSpec.parse("knn", k=1), seed=0)
    assert r.tp + r.tn >= expected_hits > n


def test_report_consistency(small_cohort):
    r = cross_validate(small_cohort, ModelSpec.parse("knn", k=3), seed=1)
    assert r.tp + r.fp + r.fn + r.tn == len(small_cohort)
    assert r.recall_normal == pytest.approx(r.tn / (r.tn + r.fp), abs=1e-12)
    assert r.accuracy == pytest.approx((r.tp + r.tn) / len(small_cohort), abs=1e-12)
    again = cross_validate(small_cohort, ModelSpec.parse("knn", k=3), seed=1)
    assert again.to_json() == r.to_json()


def test_stochastic_repeats_and_spread(small_cohort):
    r = cross_validate(small_cohort, ModelSpec.parse("rf", n_trees=10), seed=2)
    assert len(r.repeats) == 3 and set(r.spread) >= {"accuracy", "auc_roc"}
    accs = [x["accuracy"] for x in r.repeats]
    assert r.accuracy == pytest.approx(np.mean(accs), abs=1e-12)
    assert all(x["tp"] + x["fp"] + x["fn"] + x["tn"] == len(small_cohort) for x in r.repeats)


def test_fold_averaged_mode(small_cohort):
    pooled = cross_validate(small_cohort, ModelSpec.parse("knn", k=3), seed=1)
    avg = cross_validate(small_cohort, ModelSpec.parse("knn", k=3), seed=1, pooled=False)
    assert avg.meta["pooled"] is False and (avg.tp, avg.tn) == (pooled.tp, pooled.tn)


def test_null_cohort_near_majority_rate():
    null = generate_cohort(GeneratorConfig(separation=0.0, seed=11))
    r = cross_validate(null, ModelSpec.parse("knn", k=15), seed=0)
    assert abs(r.accuracy - 423 / 672) <= 0.05


def test_single_weight_is_plain_cv(small_cohort):
    from waiome.classifiers.networks import TrainingConfig

    cfg = TrainingConfig(epochs=2)
    spec = ModelSpec.parse("cnn2s")
    [(w, swept)] = weight_sweep(small_cohort, spec, [1.0], training=cfg, repeats=1, seed=3)
    plain = cross_validate(small_cohort, spec, training=cfg, repeats=1, seed=3)
    assert w == 1.0 and swept.to_json() == plain.to_json()


@pytest.mark.slow
def test_extreme_weight_favours_ome():
    from waiome.classifiers.networks import TrainingConfig

    cohort = generate_cohort(GeneratorConfig(n_normal=120, n_ome=60, seed=5))
    cfg = TrainingConfig(epochs=5)
    (_, r1), (_, r50) = weight_sweep(cohort, ModelSpec.parse("cnn2s"), [1.0, 50.0], training=cfg, repeats=1, seed=0)
    assert r50.recall_ome >= 0.95
    assert r50.recall_normal < r1.recall_normal


def test_weight_below_one_rejected(small_cohort):
    with pytest.raises(ValueError):
        weight_sweep(small_cohort, ModelSpec.parse("cnn2s"), [0.5])


def test_fold_error_carries_location(small_cohort, monkeypatch):
    import waiome.evaluation as ev
    from waiome.classifiers.networks import TrainingError

    real = ev.fit_model
    calls = []

    def flaky(spec, images, labels, **kw):
        calls.append(1)
        if len(calls) == 4:
            raise TrainingError("non-finite loss", epoch=0, batch=1, layer="0:dense")
        return real(spec, images, labels, **kw)

    monkeypatch.setattr(ev, "fit_model", flaky)
    with pytest.raises(FoldError) as e:
        cross_validate(small_cohort, ModelSpec.parse("knn", k=3), seed=0)
    assert e.value.fold == 3 and e.value.repeat == 0 and e.value.numeric


def test_table_csv_columns(small_cohort):
    r = cross_validate(small_cohort, ModelSpec.parse("knn", k=3), seed=1)
    text = table_csv([r.table_row("KNN", "3")])
    header, row = text.strip().split("\n")
    assert header.split(",")[:3] == ["classifier", "design", "auc_roc"]
    assert len(row.split(",")) == 10
