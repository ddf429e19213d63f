"""Image <-> feature-vector layout and the per-feature standardizer."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..grid import N_FREQ, N_POINTS, N_PRESSURE, WaiImage


def flatten(img):
    """Frequency-major flattening: element ``[f, p]`` lands at ``f * 51 + p``."""
    g = img.grid if isinstance(img, WaiImage) else np.asarray(img)
    if g.shape[-2:] != (N_FREQ, N_PRESSURE):
        raise ValueError(f"expected trailing shape ({N_FREQ}, {N_PRESSURE}), got {g.shape}")
    return g.reshape(g.shape[:-2] + (N_POINTS,))


def unflatten(vec):
    v = np.asarray(vec)
    if v.shape[-1] != N_POINTS:
        raise ValueError(f"expected {N_POINTS} features, got {v.shape[-1]}")
    return v.reshape(v.shape[:-1] + (N_FREQ, N_PRESSURE))


STD_FLOOR = 1e-8


@dataclass(frozen=True)
class Standardizer:
    mean: np.ndarray
    std: np.ndarray

    @classmethod
    def fit(cls, X):
        """Fit on training features only (n_samples, n_features)."""
        X = np.asarray(X, dtype=np.float64)
        return cls(X.mean(axis=0), np.maximum(X.std(axis=0), STD_FLOOR))

    def apply(self, X):
        return (np.asarray(X, dtype=np.float64) - self.mean) / self.std

    def to_json(self):
        return {"means": self.mean.tolist(), "stds": self.std.tolist()}

    @classmethod
    def from_json(cls, doc):
        return cls(np.asarray(doc["means"], dtype=np.float64), np.asarray(doc["stds"], dtype=np.float64))
