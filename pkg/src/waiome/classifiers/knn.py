"""Equal-weight k-nearest neighbours with Euclidean distance."""
from __future__ import annotations

import numpy as np


def sq_distances(Q, X, chunk_elems=2**24):
    """Exact squared Euclidean distances (no Gram-matrix shortcut, so equal
    distances compare equal)."""
    Q = np.atleast_2d(np.asarray(Q, dtype=np.float64))
    X = np.atleast_2d(np.asarray(X, dtype=np.float64))
    out = np.empty((Q.shape[0], X.shape[0]))
    step = max(1, chunk_elems // max(1, X.size))
    for s in range(0, Q.shape[0], step):
        diff = Q[s : s + step, None, :] - X[None, :, :]
        out[s : s + step] = np.einsum("qnd,qnd->qn", diff, diff)
    return out


def nearest(X_train, Q, k):
    """Indices of the k nearest training rows per query, ordered by exact
    distance with ties going to the lower index, plus those squared distances.

    A Gram-matrix pass shortlists candidates; exact distances are then
    recomputed on the shortlist, so rounding in the shortcut cannot reorder
    neighbours.
    """
    X_train = np.asarray(X_train, dtype=np.float64)
    Q = np.atleast_2d(np.asarray(Q, dtype=np.float64))
    xn = np.einsum("ij,ij->i", X_train, X_train)
    qn = np.einsum("ij,ij->i", Q, Q)
    approx = qn[:, None] + xn[None, :] - 2.0 * (Q @ X_train.T)
    kth = np.partition(approx, k - 1, axis=1)[:, k - 1]
    slack = 1e-9 * (qn + xn.max()) + 1e-12
    nn = np.empty((Q.shape[0], k), dtype=np.int64)
    d2 = np.empty((Q.shape[0], k))
    for r in range(Q.shape[0]):
        cand = np.flatnonzero(approx[r] <= kth[r] + slack[r])
        exact = sq_distances(Q[r], X_train[cand])[0]
        order = np.argsort(exact, kind="stable")[:k]
        nn[r], d2[r] = cand[order], exact[order]
    return nn, d2


def knn_predict(X_train, y_train, k, Q):
    """Return (labels, OME vote fraction) for every query row.

    Distance ties go to the lower training index. A tied vote goes to the
    class whose neighbours have the smaller summed distance, then Normal.
    """
    X_train = np.asarray(X_train, dtype=np.float64)
    y_train = np.asarray(y_train).astype(np.int64)
    if X_train.shape[0] == 0:
        raise ValueError("empty training set")
    if not 1 <= k <= X_train.shape[0]:
        raise ValueError(f"k={k} must be between 1 and the training size {X_train.shape[0]}")
    single = np.ndim(Q) == 1
    nn, d2 = nearest(X_train, Q, k)
    votes = y_train[nn]
    n_ome = votes.sum(axis=1)
    score = n_ome / k
    labels = (2 * n_ome > k).astype(np.int8)
    tied = 2 * n_ome == k
    if tied.any():
        dist = np.sqrt(d2)
        d_ome = np.where(votes == 1, dist, 0.0).sum(axis=1)
        d_norm = np.where(votes == 0, dist, 0.0).sum(axis=1)
        labels = np.where(tied, (d_ome < d_norm).astype(np.int8), labels)
    if single:
        return int(labels[0]), float(score[0])
    return labels, score
