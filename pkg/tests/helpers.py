import numpy as np

from waiome.grid import N_FREQ, N_PRESSURE, Cohort


def random_cohort(rng, n_normal, n_ome):
    imgs = rng.uniform(0, 1, (n_normal + n_ome, N_FREQ, N_PRESSURE))
    return Cohort(imgs, [0] * n_normal + [1] * n_ome, seed=0, generator="uniform")


def exact_ranksum_p(x, y):
    """Two-sided permutation p-value of the rank sum by enumerating every
    assignment of the pooled midranks to a group of size len(x)."""
    from itertools import combinations

    from scipy.stats import rankdata

    pooled = np.concatenate([x, y]).astype(float)
    ranks = rankdata(pooled)
    n1, n = len(x), len(pooled)
    mu = n1 * (n + 1) / 2.0
    obs = abs(ranks[:n1].sum() - mu)
    hits = total = 0
    for idx in combinations(range(n), n1):
        total += 1
        if abs(ranks[list(idx)].sum() - mu) >= obs - 1e-9:
            hits += 1
    return hits / total


def brute_auc(labels, scores):
    labels = np.asarray(labels)
    scores = np.asarray(scores, dtype=float)
    pos, neg = scores[labels == 1], scores[labels == 0]
    wins = sum((p > q) + 0.5 * (p == q) for p in pos for q in neg)
    return wins / (len(pos) * len(neg))


def project_box_hyperplane(v, y, C):
    """Euclidean projection onto {0 <= a <= C, y'a = 0} by bisection on the
    multiplier of the equality constraint."""
    lo, hi = -1e6, 1e6
    for _ in range(100):
        lam = 0.5 * (lo + hi)
        s = y @ np.clip(v - lam * y, 0, C)
        if s > 0:
            lo = lam
        else:
            hi = lam
    return np.clip(v - 0.5 * (lo + hi) * y, 0, C)


def dual_objective_oracle(K, y, C, iters=2000):
    """Accelerated projected gradient on the soft-margin SVM dual."""
    Q = (y[:, None] * y[None, :]) * K
    L = np.linalg.eigvalsh(Q)[-1]
    a = np.zeros(len(y))
    z, t = a.copy(), 1.0
    for _ in range(iters):
        a_next = project_box_hyperplane(z - (Q @ z - 1.0) / L, y, C)
        t_next = 0.5 * (1 + np.sqrt(1 + 4 * t * t))
        z = a_next + (t - 1) / t_next * (a_next - a)
        a, t = a_next, t_next
    return 0.5 * a @ Q @ a - a.sum(), a
