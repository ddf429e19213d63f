"""Synthetic labelled WAI cohorts.

Each class is a mean surface (baseline plus Gaussian bumps in
log2-frequency x pressure) with a per-pixel noise standard deviation map.
A sample is ``clip(mean + field * sd_map, 0, 1)`` where ``field`` is white
noise smoothed by a separable moving average and rescaled to unit variance.

Cohorts add one more term per sample, ``s * (mean_ome - mean_normal)`` with
``s ~ N(0, heterogeneity^2)``: a zero-mean severity offset along the
between-class direction. Without it the two classes are almost perfectly
separable for any smooth-noise setting; with it, class means are unchanged
and classifier accuracy sits in the ~0.8 range seen on clinical data.
"""
from __future__ import annotations

import json
from dataclasses import asdict, dataclass, field, replace
from pathlib import Path

import numpy as np

from . import seeding
from .grid import FREQUENCIES, N_FREQ, N_PRESSURE, PRESSURES, Cohort, EarLabel, ValidationError, nearest_index, quantize

_LOGF = np.log2(FREQUENCIES)[:, None]
_P = PRESSURES[None, :]


@dataclass(frozen=True)
class BumpSpec:
    center_freq: float  # Hz
    center_pressure: float  # daPa
    amplitude: float
    sigma_freq: float  # octaves
    sigma_pressure: float  # daPa

    def __post_init__(self):
        if not 0.0 <= self.amplitude <= 1.0:
            raise ValidationError(f"bump amplitude {self.amplitude} outside [0, 1]")
        if self.sigma_freq <= 0 or self.sigma_pressure <= 0:
            raise ValidationError("bump widths must be positive")

    def shape(self):
        """Unit-height bump evaluated on the grid."""
        df = (_LOGF - np.log2(self.center_freq)) / self.sigma_freq
        dp = (_P - self.center_pressure) / self.sigma_pressure
        return np.exp(-0.5 * (df * df + dp * dp))


@dataclass(frozen=True)
class NoiseRegion:
    """Rectangle (Hz x daPa) where the noise sd is raised to ``sd``; the
    raise decays as a Gaussian of width ``soft_freq`` octaves /
    ``soft_pressure`` daPa outside the rectangle."""

    freq_lo: float
    freq_hi: float
    pressure_lo: float
    pressure_hi: float
    sd: float
    soft_freq: float = 0.08
    soft_pressure: float = 20.0

    def weight(self):
        lf = _LOGF
        df = np.maximum(np.maximum(np.log2(self.freq_lo) - lf, lf - np.log2(self.freq_hi)), 0.0) / self.soft_freq
        dp = np.maximum(np.maximum(self.pressure_lo - _P, _P - self.pressure_hi), 0.0) / self.soft_pressure
        return np.exp(-0.5 * (df * df + dp * dp))


def sd_map(base_sd, regions=()):
    sd = np.full((N_FREQ, N_PRESSURE), float(base_sd))
    for r in regions:
        sd = np.maximum(sd, base_sd + (r.sd - base_sd) * r.weight())
    return sd


@dataclass(frozen=True)
class ClassProfile:
    baseline: float
    bumps: tuple
    noise_sd_map: np.ndarray
    smoothness: int = 4

    def __post_init__(self):
        sd = np.array(self.noise_sd_map, dtype=np.float64)
        if sd.ndim == 0:
            sd = np.full((N_FREQ, N_PRESSURE), float(sd))
        if sd.shape != (N_FREQ, N_PRESSURE):
            raise ValidationError(f"noise_sd_map must be {N_FREQ}x{N_PRESSURE}")
        if not np.all(np.isfinite(sd)) or np.any(sd < 0):
            raise ValidationError("noise_sd_map must be finite and nonnegative")
        if int(self.smoothness) < 0:
            raise ValidationError("smoothness must be >= 0")
        sd.flags.writeable = False
        object.__setattr__(self, "noise_sd_map", sd)
        object.__setattr__(self, "bumps", tuple(b if isinstance(b, BumpSpec) else BumpSpec(**b) for b in self.bumps))
        object.__setattr__(self, "smoothness", int(self.smoothness))

    def raw_mean(self):
        m = np.full((N_FREQ, N_PRESSURE), float(self.baseline))
        for b in self.bumps:
            m = m + b.amplitude * b.shape()
        return m

    def mean_surface(self):
        return np.clip(self.raw_mean(), 0.0, 1.0)

    def variance_surface(self):
        return self.noise_sd_map**2

    def to_json(self):
        return {
            "baseline": self.baseline,
            "bumps": [asdict(b) for b in self.bumps],
            "noise_sd_map": self.noise_sd_map.tolist(),
            "smoothness": self.smoothness,
        }

    @classmethod
    def from_json(cls, doc):
        return cls(
            baseline=float(doc["baseline"]),
            bumps=tuple(BumpSpec(**b) for b in doc.get("bumps", [])),
            noise_sd_map=np.asarray(doc["noise_sd_map"], dtype=np.float64),
            smoothness=int(doc.get("smoothness", 4)),
        )


def load_profile(path):
    return ClassProfile.from_json(json.loads(Path(path).read_text()))


def _solve_amplitudes(baseline, bumps, targets):
    """Choose bump amplitudes so the mean surface hits ``targets`` exactly
    at the nearest grid points. ``targets`` is a list of ((Hz, daPa), value),
    one per bump whose amplitude is None; other bumps keep theirs."""
    free = [i for i, b in enumerate(bumps) if b.amplitude is None]
    pts = [nearest_index(f, p) for (f, p), _ in targets]
    fixed = np.full((N_FREQ, N_PRESSURE), baseline)
    shapes = []
    for i, b in enumerate(bumps):
        s = BumpSpec(b.center_freq, b.center_pressure, 1.0, b.sigma_freq, b.sigma_pressure).shape()
        if i in free:
            shapes.append(s)
        else:
            fixed = fixed + b.amplitude * s
    A = np.array([[s[pt] for s in shapes] for pt in pts])
    rhs = np.array([v - fixed[pt] for pt, (_, v) in zip(pts, targets)])
    amps = np.linalg.solve(A, rhs)
    amp = {i: float(a) for i, a in zip(free, amps)}
    return tuple(
        BumpSpec(b.center_freq, b.center_pressure, amp.get(i, b.amplitude), b.sigma_freq, b.sigma_pressure)
        for i, b in enumerate(bumps)
    )


@dataclass
class _Bump:  # amplitude may be None (solved)
    center_freq: float
    center_pressure: float
    amplitude: float | None
    sigma_freq: float
    sigma_pressure: float


BASE_SD = 0.15
DEFAULT_SMOOTHNESS = 4
NORMAL_VAR_HOT = 0.07
OME_VAR_HOT = 0.115
NORMAL_VAR_HIGHFREQ = 0.05
HETEROGENEITY = 0.55


def default_normal_profile(smoothness=DEFAULT_SMOOTHNESS, base_sd=BASE_SD):
    baseline = 0.14
    bumps = [
        _Bump(820.0, 0.0, None, 0.14, 45.0),
        _Bump(1335.0, 20.0, None, 0.10, 35.0),
        _Bump(3270.0, 65.0, None, 0.20, 110.0),
        # broad mid-frequency body; peaks at positive pressures
        _Bump(2000.0, 30.0, 0.22, 0.55, 120.0),
    ]
    bumps = _solve_amplitudes(
        baseline,
        bumps,
        [((820.0, 0.0), 0.39), ((1335.0, 20.0), 0.50), ((3270.0, 65.0), 0.76)],
    )
    hot = float(np.sqrt(NORMAL_VAR_HOT))
    regions = (
        NoiseRegion(1834.0, 2370.0, -300.0, -110.0, hot),
        NoiseRegion(5180.0, 5500.0, -30.0, 10.0, hot),
        # moderate spread where OME ears vary most; keeps variance from
        # being a near-perfect OME marker on its own
        NoiseRegion(3700.0, 5500.0, 40.0, 200.0, float(np.sqrt(NORMAL_VAR_HIGHFREQ))),
    )
    return ClassProfile(baseline, bumps, sd_map(base_sd, regions), smoothness)


def default_ome_profile(smoothness=DEFAULT_SMOOTHNESS, base_sd=BASE_SD):
    baseline = 0.08
    bumps = [
        _Bump(5000.0, -30.0, None, 0.32, 160.0),
        _Bump(3000.0, 20.0, 0.18, 0.30, 140.0),
    ]
    bumps = _solve_amplitudes(baseline, bumps, [((5000.0, -30.0), 0.50)])
    hot = float(np.sqrt(OME_VAR_HOT))
    regions = (NoiseRegion(3700.0, 5500.0, 40.0, 200.0, hot),)
    return ClassProfile(baseline, bumps, sd_map(base_sd, regions), smoothness)


# ------------------------------------------------------------- sampling


def smooth_field(rng, half_width, shape=(N_FREQ, N_PRESSURE)):
    """Unit-variance Gaussian field: white noise through a (2h+1)^2 moving
    average, scaled back to unit variance. Every output pixel averages the
    same number of draws, so the variance is exactly 1 everywhere."""
    h = int(half_width)
    w = 2 * h + 1
    noise = rng.standard_normal((shape[0] + 2 * h, shape[1] + 2 * h))
    if h == 0:
        return noise
    c = np.cumsum(np.pad(noise, ((1, 0), (0, 0))), axis=0)
    rows = c[w:] - c[:-w]
    c = np.cumsum(np.pad(rows, ((0, 0), (1, 0))), axis=1)
    box = c[:, w:] - c[:, :-w]
    return box / w


def generate_sample(profile, rng, mean=None, severity_axis=None, severity_sd=0.0):
    """One image from ``profile``. ``mean`` overrides the profile's mean
    surface; ``severity_axis`` (with ``severity_sd`` > 0) adds a random
    multiple of that surface, drawn before the noise field."""
    mean = profile.mean_surface() if mean is None else mean
    if severity_axis is not None and severity_sd > 0:
        mean = mean + severity_sd * rng.standard_normal() * severity_axis
    sd = profile.noise_sd_map
    if not np.any(sd):
        return np.clip(mean, 0.0, 1.0)
    z = smooth_field(rng, profile.smoothness)
    return np.clip(mean + z * sd, 0.0, 1.0)


@dataclass(frozen=True)
class GeneratorConfig:
    n_normal: int = 423
    n_ome: int = 249
    seed: int = 7
    separation: float = 1.0
    heterogeneity: float = HETEROGENEITY
    normal_profile: ClassProfile | None = field(default=None, compare=False)
    ome_profile: ClassProfile | None = field(default=None, compare=False)

    def __post_init__(self):
        if self.n_normal < 0 or self.n_ome < 0:
            raise ValidationError("class counts must be >= 0")
        if self.n_normal + self.n_ome == 0:
            raise ValidationError("cohort would be empty")
        if not 0.0 <= self.separation <= 1.0:
            raise ValidationError("separation must be in [0, 1]")
        if self.heterogeneity < 0:
            raise ValidationError("heterogeneity must be >= 0")


def class_surfaces(cfg):
    """Mean and sd surfaces actually used for each class after applying
    ``separation`` (both pulled toward their midpoint)."""
    pn = cfg.normal_profile or default_normal_profile()
    po = cfg.ome_profile or default_ome_profile()
    mn, mo = pn.mean_surface(), po.mean_surface()
    sn, so = pn.noise_sd_map, po.noise_sd_map
    s = cfg.separation
    mid_m, mid_s = 0.5 * (mn + mo), 0.5 * (sn + so)
    return {
        EarLabel.NORMAL: (replace(pn, noise_sd_map=mid_s + s * (sn - mid_s)), mid_m + s * (mn - mid_m)),
        EarLabel.OME: (replace(po, noise_sd_map=mid_s + s * (so - mid_s)), mid_m + s * (mo - mid_m)),
    }


def describe(cfg):
    custom = cfg.normal_profile is not None or cfg.ome_profile is not None
    return (
        f"waiome.synth v1 separation={cfg.separation:g} heterogeneity={cfg.heterogeneity:g} "
        f"profiles={'custom' if custom else 'default'}"
    )


def generate_cohort(cfg):
    """Normals first, then OME. Sample ``i`` draws from its own stream keyed
    by (seed, i) so any subset can be regenerated independently."""
    surfaces = class_surfaces(cfg)
    axis = surfaces[EarLabel.OME][1] - surfaces[EarLabel.NORMAL][1]
    n = cfg.n_normal + cfg.n_ome
    labels = np.array([0] * cfg.n_normal + [1] * cfg.n_ome, dtype=np.int8)
    images = np.empty((n, N_FREQ, N_PRESSURE))
    for i, lab in enumerate(labels):
        profile, mean = surfaces[EarLabel(int(lab))]
        rng = seeding.rng(cfg.seed, "synth.sample", i)
        images[i] = generate_sample(profile, rng, mean=mean, severity_axis=axis, severity_sd=cfg.heterogeneity)
    # stored precision, so the cohort survives a save/load bit for bit
    images = quantize(images)
    return Cohort(images, labels, seed=cfg.seed, generator=describe(cfg))
