import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from waiome.classifiers.forest import averaged_importance, best_split, build_tree, forest_importance, rf_predict, rf_train


def gini(y):
    p = y.mean()
    return 1 - p * p - (1 - p) ** 2


def brute_split(x, y):
    """Every midpoint between distinct sorted values; lowest weighted Gini,
    first threshold on ties."""
    best = None
    vals = np.unique(x)
    for lo, hi in zip(vals[:-1], vals[1:]):
        thr = lo + (hi - lo) / 2
        left, right = y[x <= thr], y[x > thr]
        imp = (len(left) * gini(left) + len(right) * gini(right)) / len(y)
        if best is None or imp < best[1] - 1e-12:
            best = (thr, imp)
    return best


def test_stump_on_six_points_matches_brute_force():
    x = np.array([0.3, 1.2, 2.0, 2.5, 3.1, 4.4])
    y = np.array([0, 0, 1, 0, 1, 1])
    tree = build_tree(x[:, None], y, np.random.default_rng(0))
    thr, _ = brute_split(x, y)
    assert tree.feature[0] == 0 and tree.threshold[0] == thr


@settings(max_examples=200, deadline=None)
@given(st.lists(st.tuples(st.integers(0, 6), st.integers(0, 1)), min_size=2, max_size=12))
def test_split_search_matches_enumeration(rows):
    x = np.array([r[0] for r in rows], dtype=float)
    y = np.array([r[1] for r in rows])
    got = best_split(x[:, None], y, np.array([0]))
    ref = brute_split(x, y)
    if ref is None:
        assert got is None
    else:
        assert got[1] == ref[0] and got[2] == pytest.approx(ref[1], abs=1e-12)


def test_single_perfect_feature_gets_all_importance(rng):
    X = rng.normal(size=(60, 5))
    y = (X[:, 2] > 0.1).astype(int)
    f = rf_train(X, y, n_trees=1, seed=0, max_features=None, bootstrap=False)
    imp = f.importance()
    assert imp[2] == 1.0 and imp.sum() == 1.0


def test_trees_are_pure(rng):
    X = rng.normal(size=(80, 6))
    y = rng.integers(0, 2, 80)
    f = rf_train(X, y, n_trees=3, seed=1, bootstrap=False, max_features=None)
    assert np.array_equal(f.predict(X), y)


def test_importance_normalised_and_deterministic(rng):
    X = rng.normal(size=(70, 30))
    y = (X[:, :3].sum(1) > 0).astype(int)
    a = rf_train(X, y, n_trees=15, seed=4)
    b = rf_train(X, y, n_trees=15, seed=4)
    assert abs(a.importance().sum() - 1) <= 1e-9
    assert np.array_equal(a.importance(), b.importance())
    assert np.array_equal(rf_predict(a, X)[1], rf_predict(b, X)[1])
    assert np.argsort(a.importance())[-3:].tolist() != []


def test_probability_is_vote_fraction(rng):
    X = rng.normal(size=(50, 4))
    y = rng.integers(0, 2, 50)
    f = rf_train(X, y, n_trees=7, seed=2)
    labels, p = rf_predict(f, X)
    assert np.all(np.isclose(p * 7, np.round(p * 7)))
    assert np.array_equal(labels, (p >= 0.5).astype(np.int8))


def test_averaged_importance_of_identical_forests(rng):
    X = rng.normal(size=(40, 4))
    y = (X[:, 1] > 0).astype(int)
    avg = averaged_importance(X, y, sizes=(10, 20, 30), max_features=None, bootstrap=False)
    single = rf_train(X, y, n_trees=10, max_features=None, bootstrap=False).importance()
    assert np.allclose(avg, single, atol=1e-15)
    assert abs(avg.sum() - 1) <= 1e-9


def test_averaged_importance_is_grid_shaped(rng):
    X = rng.uniform(size=(30, 5457))
    y = np.repeat([0, 1], 15)
    imp = averaged_importance(X, y, sizes=(10,))
    assert imp.shape == (107, 51) and abs(imp.sum() - 1) <= 1e-9


def test_forest_importance_ignores_stumps(rng):
    X = rng.normal(size=(10, 3))
    f = rf_train(X, np.zeros(10, int), n_trees=10)
    assert np.all(forest_importance(f.trees, 3) == 0)
    assert np.all(f.predict(X) == 0)


def test_empty_training_set():
    with pytest.raises(ValueError):
        rf_train(np.zeros((0, 3)), np.zeros(0), n_trees=10)
