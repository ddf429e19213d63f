"""Soft-margin kernel SVM trained by sequential minimal optimisation.

Working-set selection follows the maximal-violating-pair rule with a
second-order choice of the second index (Fan, Chen & Lin 2005). OME is the
positive class (+1).
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

KERNELS = ("linear", "poly3", "rbf", "sigmoid")
TAU = 1e-12


class SVMError(RuntimeError):
    def __init__(self, message, iterations=None):
        self.iterations = iterations
        super().__init__(message if iterations is None else f"{message} after {iterations} iterations")


def default_gamma(X):
    X = np.asarray(X, dtype=np.float64)
    var = X.var()
    return 1.0 / (X.shape[1] * var) if var > 0 else 1.0


def kernel_matrix(kernel, A, B, gamma):
    A = np.asarray(A, dtype=np.float64)
    B = np.asarray(B, dtype=np.float64)
    if kernel == "linear":
        return A @ B.T
    if kernel == "poly3":
        return (gamma * (A @ B.T)) ** 3
    if kernel == "sigmoid":
        return np.tanh(gamma * (A @ B.T))
    if kernel == "rbf":
        d2 = (A * A).sum(1)[:, None] + (B * B).sum(1)[None, :] - 2.0 * (A @ B.T)
        return np.exp(-gamma * np.maximum(d2, 0.0))
    raise ValueError(f"unknown kernel {kernel!r}; choose from {KERNELS}")


@dataclass
class SMOResult:
    alpha: np.ndarray
    rho: float
    iterations: int
    gap: float  # max violation m(alpha) - M(alpha) at exit
    objective: float  # 0.5 a'Qa - sum(a)


def _snap(a, C):
    """Clip to [0, C] and pin values within rounding of a bound onto it, so
    bound membership of the working set is exact."""
    eps = 1e-12 * C
    if a <= eps:
        return 0.0
    if a >= C - eps:
        return C
    return a


def smo_solve(K, y, C=1.0, tol=1e-3, max_iter=None):
    """Minimise 0.5 a'Qa - e'a subject to 0 <= a <= C, y'a = 0, Q = yy'K."""
    y = np.asarray(y, dtype=np.float64)
    n = y.size
    if max_iter is None:
        max_iter = max(100_000, 100 * n)
    alpha = np.zeros(n)
    G = -np.ones(n)  # gradient Qa - e
    diagK = np.diag(K).copy()
    it = 0
    while True:
        up = ((y > 0) & (alpha < C)) | ((y < 0) & (alpha > 0))
        low = ((y > 0) & (alpha > 0)) | ((y < 0) & (alpha < C))
        score = -y * G
        if not up.any() or not low.any():
            gap = 0.0
            break
        i = int(np.argmax(np.where(up, score, -np.inf)))
        m_up = score[i]
        m_low = np.min(np.where(low, score, np.inf))
        gap = m_up - m_low
        if gap < tol:
            break
        if it >= max_iter:
            raise SVMError("SMO did not reach the KKT tolerance", it)
        b = m_up - score
        cand = low & (b > 0)
        a = diagK[i] + diagK - 2.0 * K[i]
        a = np.where(a > 0, a, TAU)
        j = int(np.argmin(np.where(cand, -(b * b) / a, np.inf)))

        # analytic two-variable step on alpha_j, alpha_i follows from y'a = 0
        eta = max(diagK[i] + diagK[j] - 2.0 * K[i, j], TAU)
        Ei, Ej = y[i] * G[i], y[j] * G[j]  # errors up to a shared bias
        ai, aj = alpha[i], alpha[j]
        if y[i] != y[j]:
            L, H = max(0.0, aj - ai), min(C, C + aj - ai)
        else:
            L, H = max(0.0, ai + aj - C), min(C, ai + aj)
        aj_new = min(max(aj + y[j] * (Ei - Ej) / eta, L), H)
        ai_new = ai + y[i] * y[j] * (aj - aj_new)
        ai_new, aj_new = _snap(ai_new, C), _snap(aj_new, C)
        dai, daj = ai_new - ai, aj_new - aj
        alpha[i], alpha[j] = ai_new, aj_new
        G += y * (K[:, i] * (y[i] * dai) + K[:, j] * (y[j] * daj))
        it += 1

    free = (alpha > 0) & (alpha < C)
    yG = y * G
    if free.any():
        rho = float(yG[free].mean())
    else:
        up = ((y > 0) & (alpha < C)) | ((y < 0) & (alpha > 0))
        low = ((y > 0) & (alpha > 0)) | ((y < 0) & (alpha < C))
        ub = np.min(yG[up]) if up.any() else np.inf
        lb = np.max(yG[low]) if low.any() else -np.inf
        if np.isfinite(ub) and np.isfinite(lb):
            rho = float(0.5 * (ub + lb))
        else:
            rho = float(ub if np.isfinite(ub) else lb)
    objective = float(0.5 * alpha @ (G + 1.0) - alpha.sum())  # Qa = G + e
    return SMOResult(alpha, rho, it, float(gap), objective)


@dataclass
class SVMModel:
    kernel: str
    gamma: float
    C: float
    support_vectors: np.ndarray
    dual_coef: np.ndarray  # alpha_i * y_i
    rho: float
    iterations: int = 0

    def decision_function(self, X):
        K = kernel_matrix(self.kernel, np.atleast_2d(X), self.support_vectors, self.gamma)
        return K @ self.dual_coef - self.rho


def svm_train(X, y, kernel="rbf", C=1.0, gamma=None, tol=1e-3, max_iter=None):
    """``y`` uses 1 = OME, 0 = Normal."""
    X = np.asarray(X, dtype=np.float64)
    y = np.asarray(y)
    if kernel not in KERNELS:
        raise ValueError(f"unknown kernel {kernel!r}; choose from {KERNELS}")
    if np.unique(y).size < 2:
        raise ValueError("SVM training needs both classes")
    ys = np.where(y == 1, 1.0, -1.0)
    g = default_gamma(X) if gamma is None else float(gamma)
    K = kernel_matrix(kernel, X, X, g)
    res = smo_solve(K, ys, C=C, tol=tol, max_iter=max_iter)
    sv = res.alpha > 0
    return SVMModel(kernel, g, C, X[sv].copy(), (res.alpha * ys)[sv], res.rho, res.iterations)


def svm_predict(model, X):
    """(labels, margins); label is OME iff the margin is positive."""
    margin = model.decision_function(X)
    return (margin > 0).astype(np.int8), margin


def margin_to_probability(margin):
    return 1.0 / (1.0 + np.exp(-np.asarray(margin, dtype=np.float64)))
