import numpy as np
import pytest

from waiome.classifiers.svm import KERNELS, SVMError, default_gamma, kernel_matrix, smo_solve, svm_predict, svm_train
from waiome.evaluation import roc_auc

from helpers import dual_objective_oracle


def test_separable_toy():
    X = np.array([[0.0, 0], [0, 1], [3, 3], [3, 4]])
    y = np.array([0, 0, 1, 1])
    m = svm_train(X, y, kernel="linear")
    labels, margin = svm_predict(m, X)
    assert np.array_equal(labels, y)
    assert np.all(np.sign(margin) == np.where(y == 1, 1, -1))


def test_xor_with_rbf():
    X = np.array([[0.0, 0], [1, 1], [0, 1], [1, 0]])
    y = np.array([0, 0, 1, 1])
    m = svm_train(X, y, kernel="rbf", C=10.0, gamma=2.0)
    assert np.array_equal(svm_predict(m, X)[0], y)


@pytest.mark.parametrize("kernel", KERNELS)
def test_dual_objective_matches_projected_gradient(kernel, rng):
    X = np.vstack([rng.normal(-1.5, 1, (30, 2)), rng.normal(1.5, 1, (30, 2))])
    y = np.repeat([-1.0, 1.0], 30)
    K = kernel_matrix(kernel, X, X, default_gamma(X))
    res = smo_solve(K, y, C=1.0)
    ref, _ = dual_objective_oracle(K, y, 1.0)
    assert abs(res.objective - ref) <= 1e-2
    assert np.all((res.alpha >= 0) & (res.alpha <= 1.0))
    assert abs(y @ res.alpha) < 1e-9
    assert res.gap < 1e-3


def test_single_class_rejected():
    with pytest.raises(ValueError):
        svm_train(np.zeros((3, 2)), np.ones(3))


def test_iteration_cap_raises_with_count(rng):
    X = rng.normal(size=(40, 3))
    y = rng.integers(0, 2, 40)
    with pytest.raises(SVMError) as e:
        svm_train(X, y, kernel="rbf", max_iter=2)
    assert e.value.iterations == 2


def test_auc_is_invariant_to_margin_squashing(rng):
    X = rng.normal(size=(80, 4))
    y = (X[:, 0] + rng.normal(0, 1, 80) > 0).astype(int)
    m = svm_train(X, y, kernel="rbf")
    margin = m.decision_function(X)
    prob = 1 / (1 + np.exp(-margin))
    assert roc_auc(y, margin) == roc_auc(y, prob)


def test_unknown_kernel():
    with pytest.raises(ValueError):
        svm_train(np.eye(2), [0, 1], kernel="laplace")
