"""Random forest of Gini decision trees with mean-decrease-impurity importances."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from joblib import Parallel, delayed

from .. import seeding
from ..grid import N_FREQ, N_PRESSURE

LEAF = -1
TIE_TOL = 1e-12
AVERAGED_FOREST_SIZES = (10, 20, 30, 40, 50, 100, 200, 300, 400, 500)


@dataclass
class Tree:
    feature: np.ndarray  # -1 at leaves
    threshold: np.ndarray
    left: np.ndarray
    right: np.ndarray
    value: np.ndarray  # fraction of OME among training samples at the node
    importance: np.ndarray  # raw impurity decrease per feature (unnormalised)

    def apply(self, X):
        node = np.zeros(X.shape[0], dtype=np.int64)
        rows = np.arange(X.shape[0])
        while True:
            f = self.feature[node]
            inner = f != LEAF
            if not inner.any():
                return node
            fi = np.where(inner, f, 0)
            go_left = X[rows, fi] <= self.threshold[node]
            node = np.where(inner, np.where(go_left, self.left[node], self.right[node]), node)

    def predict_proba(self, X):
        return self.value[self.apply(X)]

    @property
    def n_nodes(self):
        return self.feature.size


def gini(pos, n):
    p = pos / n
    return 2.0 * p * (1.0 - p)


def best_split(sub, yn, features):
    """Lowest weighted-Gini threshold over the columns of ``sub`` (the node's
    samples restricted to the candidate ``features``).

    Returns (feature, threshold, impurity) or None if every candidate is
    constant. Ties go to the earlier candidate, then the lower threshold.
    """
    n = yn.size
    order = np.argsort(sub, axis=0, kind="stable")
    xs = np.take_along_axis(sub, order, axis=0)
    ys = yn[order]
    pos_l = np.cumsum(ys, axis=0)[:-1].astype(np.float64)
    n_l = np.arange(1, n, dtype=np.float64)[:, None]
    n_r = n - n_l
    pos_r = yn.sum() - pos_l
    imp = (n_l * gini(pos_l, n_l) + n_r * gini(pos_r, n_r)) / n
    valid = xs[1:] > xs[:-1]
    if not valid.any():
        return None
    imp = np.where(valid, imp, np.inf).T  # (features, positions): feature-major argmin
    # first position within rounding of the minimum, so exact ties are stable
    k = int(np.argmax(imp.ravel() <= imp.min() + TIE_TOL))
    fi, pos = divmod(k, n - 1)
    lo, hi = xs[pos, fi], xs[pos + 1, fi]
    thr = lo + (hi - lo) / 2.0
    if not lo <= thr < hi:
        thr = lo
    return int(features[fi]), float(thr), float(imp[fi, pos])


def build_tree(X, y, rng, max_features=None, sample_idx=None):
    """Grow one tree to purity (or until a node has < 2 samples)."""
    n_features = X.shape[1]
    mtry = n_features if max_features is None else int(min(max_features, n_features))
    idx0 = np.arange(X.shape[0]) if sample_idx is None else np.asarray(sample_idx)
    n_root = idx0.size
    feature, threshold, left, right, value = [], [], [], [], []
    importance = np.zeros(n_features)

    def new_node(idx):
        feature.append(LEAF)
        threshold.append(0.0)
        left.append(LEAF)
        right.append(LEAF)
        value.append(float(y[idx].mean()))
        return len(feature) - 1

    stack = [(new_node(idx0), idx0)]
    while stack:
        node, idx = stack.pop()
        yn = y[idx]
        n = idx.size
        pos = int(yn.sum())
        if n < 2 or pos == 0 or pos == n:
            continue
        split = None
        # draw mtry features; if all are constant here, keep drawing from the rest
        perm = rng.permutation(n_features) if mtry < n_features else np.arange(n_features)
        for start in range(0, n_features, mtry):
            feats = perm[start : start + mtry]
            split = best_split(X[np.ix_(idx, feats)], yn, feats)
            if split is not None:
                break
        if split is None:
            continue
        f, thr, child_imp = split
        go_left = X[idx, f] <= thr
        li, ri = idx[go_left], idx[~go_left]
        importance[f] += (n * gini(pos, n) - n * child_imp) / n_root
        feature[node], threshold[node] = f, thr
        left[node] = new_node(li)
        right[node] = new_node(ri)
        stack.append((right[node], ri))
        stack.append((left[node], li))
    return Tree(
        np.array(feature, dtype=np.int64),
        np.array(threshold),
        np.array(left, dtype=np.int64),
        np.array(right, dtype=np.int64),
        np.array(value),
        importance,
    )


@dataclass
class Forest:
    trees: list
    n_features: int

    def predict_proba(self, X):
        """Fraction of trees voting OME (each tree votes its leaf majority)."""
        X = np.atleast_2d(np.asarray(X, dtype=np.float64))
        votes = np.zeros(X.shape[0])
        for t in self.trees:
            votes += t.predict_proba(X) > 0.5
        return votes / len(self.trees)

    def predict(self, X):
        return (self.predict_proba(X) >= 0.5).astype(np.int8)

    def importance(self):
        return forest_importance(self.trees, self.n_features)


def forest_importance(trees, n_features):
    acc = np.zeros(n_features)
    used = 0
    for t in trees:
        s = t.importance.sum()
        if s > 0:
            acc += t.importance / s
            used += 1
    if used == 0:
        return acc
    acc /= used
    return acc / acc.sum()


def _fit_tree(X, y, seed, i, max_features, bootstrap):
    rng = seeding.rng(seed, "rf.tree", i)
    idx = rng.integers(0, X.shape[0], X.shape[0]) if bootstrap else None
    return build_tree(X, y, rng, max_features=max_features, sample_idx=idx)


def rf_train(X, y, n_trees=100, seed=0, max_features="sqrt", bootstrap=True, n_jobs=1):
    X = np.asarray(X, dtype=np.float64)
    y = np.asarray(y, dtype=np.int64)
    if X.shape[0] == 0:
        raise ValueError("empty training set")
    if max_features == "sqrt":
        max_features = int(np.floor(np.sqrt(X.shape[1])))
    elif max_features is None:
        max_features = X.shape[1]
    if n_jobs == 1:
        trees = [_fit_tree(X, y, seed, i, max_features, bootstrap) for i in range(n_trees)]
    else:
        trees = Parallel(n_jobs=n_jobs)(delayed(_fit_tree)(X, y, seed, i, max_features, bootstrap) for i in range(n_trees))
    return Forest(trees, X.shape[1])


def rf_predict(forest, X):
    p = forest.predict_proba(X)
    return (p >= 0.5).astype(np.int8), p


def rf_importance(forest):
    return forest.importance()


def averaged_importance(X, y, seed=0, sizes=AVERAGED_FOREST_SIZES, n_jobs=1, **kw):
    """Mean of the normalised importance vectors of forests of each size in
    ``sizes``, reshaped to the 107 x 51 grid when the features are pixels."""
    vecs = []
    for k, n_trees in enumerate(sizes):
        forest = rf_train(X, y, n_trees=n_trees, seed=seeding.child_seed(seed, "rf.averaged", k), n_jobs=n_jobs, **kw)
        vecs.append(forest.importance())
    imp = np.mean(vecs, axis=0)
    if imp.sum() > 0:
        imp = imp / imp.sum()
    if imp.size == N_FREQ * N_PRESSURE:
        return imp.reshape(N_FREQ, N_PRESSURE)
    return imp
