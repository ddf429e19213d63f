"""Per-pixel class statistics and Wilcoxon rank-sum significance maps."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.special import ndtr

from .grid import N_FREQ, N_POINTS, N_PRESSURE, EarLabel, ValidationError


@dataclass(frozen=True)
class StatSurface:
    mean_normal: np.ndarray | None = None
    var_normal: np.ndarray | None = None
    mean_ome: np.ndarray | None = None
    var_ome: np.ndarray | None = None
    z_map: np.ndarray | None = None
    p_map: np.ndarray | None = None

    def merged(self, other):
        kw = {k: getattr(self, k) if getattr(self, k) is not None else getattr(other, k) for k in self.__dataclass_fields__}
        return StatSurface(**kw)


@dataclass(frozen=True)
class RegionMask:
    mask: np.ndarray

    def __post_init__(self):
        m = np.array(self.mask, dtype=bool)
        m.flags.writeable = False
        object.__setattr__(self, "mask", m)

    @property
    def count(self):
        return int(self.mask.sum())

    def __eq__(self, other):
        return isinstance(other, RegionMask) and np.array_equal(self.mask, other.mask)

    __hash__ = None


def class_moment_maps(cohort):
    out = {}
    for label in EarLabel:
        imgs = cohort.class_images(label)
        if imgs.shape[0] < 2:
            raise ValidationError(f"class {label.text!r} has {imgs.shape[0]} sample(s); need at least 2")
        out[f"mean_{label.text}"] = imgs.mean(axis=0)
        out[f"var_{label.text}"] = imgs.var(axis=0, ddof=1)
    return StatSurface(**out)


def midranks(a):
    """Ranks along axis 0 (1-based), ties get the average of their positions.

    Also returns the tie term sum(t^3 - t) per column.
    """
    a = np.asarray(a, dtype=np.float64)
    n = a.shape[0]
    order = np.argsort(a, axis=0, kind="stable")
    s = np.take_along_axis(a, order, axis=0)
    idx = np.arange(n).reshape((n,) + (1,) * (a.ndim - 1))
    first = np.ones(s.shape, dtype=bool)
    first[1:] = s[1:] != s[:-1]
    last = np.ones(s.shape, dtype=bool)
    last[:-1] = s[1:] != s[:-1]
    start = np.maximum.accumulate(np.where(first, idx, 0), axis=0)
    end = np.flip(np.minimum.accumulate(np.flip(np.where(last, idx, n), axis=0), axis=0), axis=0)
    ranks_sorted = 0.5 * (start + end) + 1.0
    t = (end - start + 1).astype(np.float64)
    ties = (t * t - 1.0).sum(axis=0)  # sum over members of (t^2-1) == sum over groups of (t^3-t)
    ranks = np.empty_like(ranks_sorted)
    np.put_along_axis(ranks, order, ranks_sorted, axis=0)
    return ranks, ties


def _ranksum_z(ranks_x_sum, ties, n1, n2):
    n = n1 + n2
    mu = n1 * (n + 1) / 2.0
    var = n1 * n2 / 12.0 * ((n + 1) - ties / (n * (n - 1))) if n > 1 else np.zeros_like(ties)
    diff = ranks_x_sum - mu
    diff = np.sign(diff) * np.maximum(np.abs(diff) - 0.5, 0.0)
    with np.errstate(divide="ignore", invalid="ignore"):
        z = np.where(var > 0, diff / np.sqrt(np.where(var > 0, var, 1.0)), 0.0)
    p = np.minimum(2.0 * ndtr(-np.abs(z)), 1.0)
    return z, p


def wilcoxon_ranksum(x, y):
    """Two-sided rank-sum test of x against y.

    Normal approximation with midranks, tie-corrected variance and a 0.5
    continuity correction. ``z < 0`` means x tends to rank below y.
    """
    x = np.asarray(x, dtype=np.float64).ravel()
    y = np.asarray(y, dtype=np.float64).ravel()
    if x.size == 0 or y.size == 0:
        raise ValueError("both samples must be nonempty")
    ranks, ties = midranks(np.concatenate([x, y]))
    z, p = _ranksum_z(ranks[: x.size].sum(), ties, x.size, y.size)
    return float(z), float(p)


def ranksum_columns(x, y):
    """Vectorised :func:`wilcoxon_ranksum` over trailing axes: x is (n1, ...)."""
    x = np.asarray(x, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    if x.shape[0] == 0 or y.shape[0] == 0:
        raise ValueError("both samples must be nonempty")
    ranks, ties = midranks(np.concatenate([x, y], axis=0))
    return _ranksum_z(ranks[: x.shape[0]].sum(axis=0), ties, x.shape[0], y.shape[0])


def significance_map(cohort):
    """Rank-sum test at every pixel, normal class as ``x``: positive z means
    normal ears absorb more."""
    normal = cohort.class_images(EarLabel.NORMAL)
    ome = cohort.class_images(EarLabel.OME)
    if normal.shape[0] == 0 or ome.shape[0] == 0:
        raise ValidationError("significance map needs both classes")
    z, p = ranksum_columns(normal, ome)
    return StatSurface(z_map=z, p_map=p)


def region_size(fraction, n_points=N_POINTS):
    return int(np.floor(n_points * fraction + 0.5))


def top_fraction_region(p_map, fraction):
    """The ``round(5457 * fraction)`` pixels with the smallest p; ties go to
    the lower frequency index, then the lower pressure index."""
    if not 0.0 < fraction <= 1.0:
        raise ValueError("fraction must be in (0, 1]")
    p = np.asarray(p_map, dtype=np.float64)
    k = region_size(fraction, p.size)
    order = np.argsort(p.ravel(), kind="stable")
    mask = np.zeros(p.size, dtype=bool)
    mask[order[:k]] = True
    return RegionMask(mask.reshape(p.shape))


def top_fraction_of_scores(scores, fraction):
    """Same selection for a higher-is-better score surface."""
    s = np.asarray(scores, dtype=np.float64)
    return top_fraction_region(-s, fraction)


def region_mean(cohort, mask, label):
    m = mask.mask if isinstance(mask, RegionMask) else np.asarray(mask, dtype=bool)
    if m.shape != (N_FREQ, N_PRESSURE) or not m.any():
        raise ValueError("mask must be a 107x51 boolean grid with at least one point")
    imgs = cohort.class_images(EarLabel(int(label)))
    if imgs.shape[0] == 0:
        raise ValidationError(f"no samples labelled {EarLabel(int(label)).text!r}")
    return float(imgs[:, m].mean())


def jaccard(a, b):
    a = a.mask if isinstance(a, RegionMask) else np.asarray(a, dtype=bool)
    b = b.mask if isinstance(b, RegionMask) else np.asarray(b, dtype=bool)
    union = np.logical_or(a, b).sum()
    return float(np.logical_and(a, b).sum() / union) if union else 1.0
