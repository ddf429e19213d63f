"""Monotone piecewise cubic Hermite interpolation (Fritsch-Carlson slopes).

Used to move each frequency row of a raw measurement onto the canonical
10-daPa pressure axis.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .grid import N_FREQ, PRESSURES, RawMeasurement, ValidationError, WaiImage


class PchipError(ValueError):
    pass


def _endpoint_slope(h0, h1, s0, s1):
    # non-centred three-point estimate, then shape-preserving clamp
    d = ((2.0 * h0 + h1) * s0 - h0 * s1) / (h0 + h1)
    if np.sign(d) != np.sign(s0):
        return 0.0
    if np.sign(s0) != np.sign(s1) and abs(d) > abs(3.0 * s0):
        return 3.0 * s0
    return d


def pchip_slopes(x, y):
    x = np.asarray(x, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    if x.ndim != 1 or x.shape != y.shape:
        raise PchipError("x and y must be 1-D arrays of equal length")
    if x.size < 2:
        raise PchipError("need at least two knots")
    h = np.diff(x)
    if not np.all(h > 0):
        j = int(np.argmax(~(h > 0)))
        raise PchipError(f"knots must be strictly increasing (x[{j + 1}]={x[j + 1]!r} <= x[{j}]={x[j]!r})")
    s = np.diff(y) / h
    n = x.size
    if n == 2:
        return np.array([s[0], s[0]])

    d = np.zeros(n)
    h0, h1 = h[:-1], h[1:]
    s0, s1 = s[:-1], s[1:]
    same = (s0 * s1) > 0
    w1 = 2.0 * h1 + h0
    w2 = h1 + 2.0 * h0
    with np.errstate(divide="ignore", invalid="ignore", over="ignore"):
        hm = (w1 + w2) / (w1 / s0 + w2 / s1)
    d[1:-1] = np.where(same, hm, 0.0)
    d[0] = _endpoint_slope(h[0], h[1], s[0], s[1])
    d[-1] = _endpoint_slope(h[-1], h[-2], s[-1], s[-2])
    return d


@dataclass(frozen=True)
class HermiteSegmentSet:
    x: np.ndarray
    y: np.ndarray
    d: np.ndarray

    @classmethod
    def fit(cls, x, y):
        x = np.asarray(x, dtype=np.float64)
        y = np.asarray(y, dtype=np.float64)
        return cls(x, y, pchip_slopes(x, y))

    def __call__(self, q):
        return pchip_evaluate(self, q)


def pchip_evaluate(seg, q):
    """Evaluate the Hermite interpolant; outside the knot range the boundary
    value is held constant."""
    x, y, d = seg.x, seg.y, seg.d
    q = np.asarray(q, dtype=np.float64)
    qc = np.clip(q, x[0], x[-1])
    k = np.clip(np.searchsorted(x, qc, side="right") - 1, 0, x.size - 2)
    h = x[k + 1] - x[k]
    t = (qc - x[k]) / h
    # Horner form about y[k]: flat segments come out exactly flat
    dy = y[k + 1] - y[k]
    a1 = h * d[k]
    a2 = 3.0 * dy - 2.0 * a1 - h * d[k + 1]
    a3 = a1 + h * d[k + 1] - 2.0 * dy
    out = y[k] + t * (a1 + t * (a2 + t * a3))
    # exact at knots
    at_knot = qc == x[k]
    out = np.where(at_knot, y[k], out)
    out = np.where(qc == x[-1], y[-1], out)
    return out


def pchip_derivative(seg, q, side="right"):
    """First derivative of the interpolant. At a knot, ``side`` picks the
    segment to its left or right, so both one-sided values can be compared."""
    x, y, d = seg.x, seg.y, seg.d
    q = np.asarray(q, dtype=np.float64)
    k = np.clip(np.searchsorted(x, q, side=side) - 1, 0, x.size - 2)
    h = x[k + 1] - x[k]
    t = (q - x[k]) / h
    t2 = t * t
    dh00 = (6 * t2 - 6 * t) / h
    dh10 = 3 * t2 - 4 * t + 1
    dh01 = (-6 * t2 + 6 * t) / h
    dh11 = 3 * t2 - 2 * t
    return dh00 * y[k] + dh10 * d[k] + dh01 * y[k + 1] + dh11 * d[k + 1]


def pchip_interpolate(x, y, q):
    return pchip_evaluate(HermiteSegmentSet.fit(x, y), q)


def resample_pressure(raw, pressures=PRESSURES):
    """Resample every frequency row of ``raw`` onto the canonical pressure axis."""
    if not isinstance(raw, RawMeasurement):
        raise TypeError("expected a RawMeasurement")
    problems = raw.violations()
    if problems:
        raise ValidationError(f"invalid raw measurement: {problems[0]}", problems)
    out = np.empty((N_FREQ, len(pressures)))
    for row in range(N_FREQ):
        try:
            out[row] = pchip_interpolate(raw.pressures, raw.absorbance[row], pressures)
        except PchipError as e:
            raise PchipError(f"row {row}: {e}") from e
    return WaiImage(np.clip(out, 0.0, 1.0))
