"""Frequency/pressure axes, the absorbance grid model and its file formats.

Grids are indexed ``[frequency_bin, pressure_bin]`` (107 x 51). On disk a
grid is a CSV whose header row names the pressures (``freq_hz,p_-300,...``)
and whose 107 data rows start with the frequency in Hz.
"""
from __future__ import annotations

import csv
import enum
import io
import json
import os
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

N_FREQ = 107
N_PRESSURE = 51
N_POINTS = N_FREQ * N_PRESSURE
F_MIN, F_MAX = 226.0, 8000.0
P_MIN, P_MAX, P_STEP = -300.0, 200.0, 10.0

FLOAT_FMT = "{:.9g}"


class ParseError(ValueError):
    """Malformed grid/manifest file. ``line`` is 1-based (0 if unknown)."""

    def __init__(self, message, path=None, line=0):
        self.path = path
        self.line = line
        where = f"{path}:{line}" if path is not None else f"line {line}"
        super().__init__(f"{where}: {message}")


class ValidationError(ValueError):
    """Data parsed fine but violates a domain invariant."""

    def __init__(self, message, violations=None):
        self.violations = list(violations or [])
        super().__init__(message)


class EarLabel(enum.IntEnum):
    NORMAL = 0
    OME = 1

    @property
    def text(self):
        return self.name.lower()

    @classmethod
    def parse(cls, text):
        try:
            return cls[str(text).strip().upper()]
        except KeyError:
            raise ValidationError(f"unknown label {text!r}; expected 'normal' or 'ome'") from None


def build_frequency_axis():
    """107 log-spaced frequencies with exact 226 Hz and 8000 Hz endpoints."""
    i = np.arange(N_FREQ, dtype=np.float64)
    f = F_MIN * (F_MAX / F_MIN) ** (i / (N_FREQ - 1))
    f[0], f[-1] = F_MIN, F_MAX
    f.flags.writeable = False
    return f


def build_pressure_axis():
    p = P_MIN + P_STEP * np.arange(N_PRESSURE, dtype=np.float64)
    p.flags.writeable = False
    return p


FREQUENCIES = build_frequency_axis()
PRESSURES = build_pressure_axis()


def nearest_index(frequency_hz=None, pressure_dapa=None):
    """Grid index closest to a (Hz, daPa) point; frequency matched in log space."""
    fi = pi = None
    if frequency_hz is not None:
        fi = int(np.argmin(np.abs(np.log(FREQUENCIES) - np.log(frequency_hz))))
    if pressure_dapa is not None:
        pi = int(np.argmin(np.abs(PRESSURES - pressure_dapa)))
    if fi is None:
        return pi
    if pi is None:
        return fi
    return fi, pi


@dataclass(frozen=True)
class WaiImage:
    """One absorbance surface, shape (107, 51). Not validated on construction;
    call :func:`validate_image`."""

    grid: np.ndarray

    def __post_init__(self):
        g = np.array(self.grid, dtype=np.float64)
        g.flags.writeable = False
        object.__setattr__(self, "grid", g)

    def __eq__(self, other):
        if not isinstance(other, WaiImage):
            return NotImplemented
        return self.grid.shape == other.grid.shape and bool(np.array_equal(self.grid, other.grid))

    __hash__ = None


@dataclass(frozen=True)
class Violation:
    kind: str  # "shape" | "range" | "nonfinite"
    index: tuple | None
    detail: str


def validate_image(img):
    """Return a list of violations (empty list means the image is valid)."""
    grid = img.grid if isinstance(img, WaiImage) else np.asarray(img, dtype=np.float64)
    out = []
    if grid.shape != (N_FREQ, N_PRESSURE):
        out.append(Violation("shape", None, f"shape {grid.shape} != {(N_FREQ, N_PRESSURE)}"))
        if grid.ndim != 2:
            return out
    for idx in zip(*np.nonzero(~np.isfinite(grid))):
        out.append(Violation("nonfinite", tuple(int(i) for i in idx), "non-finite absorbance"))
    with np.errstate(invalid="ignore"):
        bad = (grid < 0.0) | (grid > 1.0)
    for idx in zip(*np.nonzero(bad)):
        idx = tuple(int(i) for i in idx)
        out.append(Violation("range", idx, f"absorbance {grid[idx]!r} outside [0, 1]"))
    return out


@dataclass(frozen=True)
class RawMeasurement:
    """Absorbance rows on the measured (possibly irregular) pressure axis."""

    pressures: np.ndarray
    absorbance: np.ndarray  # (107, P)

    def __post_init__(self):
        p = np.array(self.pressures, dtype=np.float64)
        a = np.array(self.absorbance, dtype=np.float64)
        p.flags.writeable = False
        a.flags.writeable = False
        object.__setattr__(self, "pressures", p)
        object.__setattr__(self, "absorbance", a)

    def violations(self):
        out = []
        p, a = self.pressures, self.absorbance
        if p.ndim != 1 or p.size < 2:
            out.append("need at least 2 pressure samples")
            return out
        if a.shape != (N_FREQ, p.size):
            out.append(f"absorbance shape {a.shape} != {(N_FREQ, p.size)}")
            return out
        steps = np.diff(p)
        for j in np.nonzero(~(steps > 0))[0]:
            out.append(f"pressure column {j + 1} ({p[j + 1]:g}) not greater than column {j} ({p[j]:g})")
        with np.errstate(invalid="ignore"):
            bad = ~((a >= 0.0) & (a <= 1.0))
        for r, c in zip(*np.nonzero(bad)):
            out.append(f"row {r} column {c}: absorbance {a[r, c]!r} outside [0, 1]")
        return out


@dataclass(frozen=True)
class Cohort:
    """Labelled images stored as one (n, 107, 51) array plus a label vector
    (1 = OME)."""

    images: np.ndarray
    labels: np.ndarray
    seed: int | None = None
    generator: str = ""
    extra: dict = field(default_factory=dict, compare=False)

    def __post_init__(self):
        imgs = np.array(self.images, dtype=np.float64)
        labels = np.array(self.labels, dtype=np.int8)
        if imgs.ndim != 3 or imgs.shape[1:] != (N_FREQ, N_PRESSURE):
            raise ValidationError(f"cohort images must have shape (n, {N_FREQ}, {N_PRESSURE}), got {imgs.shape}")
        if imgs.shape[0] == 0:
            raise ValidationError("cohort is empty")
        if labels.shape != (imgs.shape[0],):
            raise ValidationError("one label per image required")
        if not np.isin(labels, (0, 1)).all():
            raise ValidationError("labels must be 0 (normal) or 1 (ome)")
        with np.errstate(invalid="ignore"):
            bad = ~((imgs >= 0.0) & (imgs <= 1.0))
        if bad.any():
            n, f, p = (int(i) for i in np.argwhere(bad)[0])
            raise ValidationError(f"sample {n}: absorbance at [{f}, {p}] outside [0, 1]")
        imgs.flags.writeable = False
        labels.flags.writeable = False
        object.__setattr__(self, "images", imgs)
        object.__setattr__(self, "labels", labels)

    def __len__(self):
        return self.images.shape[0]

    def __eq__(self, other):
        if not isinstance(other, Cohort):
            return NotImplemented
        return (
            self.seed == other.seed
            and self.generator == other.generator
            and np.array_equal(self.labels, other.labels)
            and np.array_equal(self.images, other.images)
        )

    __hash__ = None

    @property
    def samples(self):
        return [(WaiImage(img), EarLabel(int(lab))) for img, lab in zip(self.images, self.labels)]

    @classmethod
    def from_samples(cls, samples, seed=None, generator=""):
        samples = list(samples)
        if not samples:
            raise ValidationError("cohort is empty")
        imgs = np.stack([s[0].grid if isinstance(s[0], WaiImage) else np.asarray(s[0]) for s in samples])
        labels = [int(EarLabel(s[1])) for s in samples]
        return cls(imgs, labels, seed=seed, generator=generator)

    def subset(self, idx):
        return Cohort(self.images[idx], self.labels[idx], seed=self.seed, generator=self.generator)

    def class_images(self, label):
        return self.images[self.labels == int(label)]

    def counts(self):
        n_ome = int(self.labels.sum())
        return len(self) - n_ome, n_ome


# ---------------------------------------------------------------- CSV I/O


def _fmt(v):
    return FLOAT_FMT.format(float(v))


def quantize(a):
    """Values as they come back after a save/load through decimal text."""
    return np.vectorize(lambda v: float(_fmt(v)), otypes=[np.float64])(a)


def format_grid_csv(values, pressures=PRESSURES, frequencies=FREQUENCIES, fmt=_fmt):
    values = np.asarray(values)
    buf = io.StringIO()
    buf.write("freq_hz," + ",".join(f"p_{_fmt(p)}" for p in pressures) + "\n")
    for f, row in zip(frequencies, values):
        buf.write(_fmt(f) + "," + ",".join(fmt(v) for v in row) + "\n")
    return buf.getvalue()


def write_grid_csv(path, values, pressures=PRESSURES, fmt=_fmt):
    Path(path).write_text(format_grid_csv(values, pressures, fmt=fmt), newline="")


def read_table_csv(path):
    """Parse a grid-shaped CSV into (pressures, frequencies, values).

    Only structure is checked here; domain checks are the caller's job.
    """
    path = Path(path)
    try:
        text = path.read_text()
    except UnicodeDecodeError as e:
        raise ParseError(f"not a text file ({e})", path) from None
    rows = list(csv.reader(io.StringIO(text)))
    if not rows or not rows[0]:
        raise ParseError("empty file, header row missing", path, 1)
    header = [h.strip() for h in rows[0]]
    if header[0] != "freq_hz" or len(header) < 3:
        raise ParseError("header row missing: expected 'freq_hz,p_<daPa>,...'", path, 1)
    pressures = []
    for h in header[1:]:
        if not h.startswith("p_"):
            raise ParseError(f"bad pressure column name {h!r}", path, 1)
        try:
            pressures.append(float(h[2:]))
        except ValueError:
            raise ParseError(f"bad pressure column name {h!r}", path, 1) from None
    freqs, values = [], []
    for lineno, row in enumerate(rows[1:], start=2):
        if not row or all(not c.strip() for c in row):
            continue
        if len(row) != len(header):
            raise ParseError(f"expected {len(header)} columns, found {len(row)}", path, lineno)
        try:
            nums = [float(c) for c in row]
        except ValueError as e:
            raise ParseError(f"non-numeric value ({e})", path, lineno) from None
        freqs.append(nums[0])
        values.append(nums[1:])
    if len(values) != N_FREQ:
        raise ParseError(f"expected {N_FREQ} data rows, found {len(values)}", path, len(rows))
    return np.array(pressures), np.array(freqs), np.array(values, dtype=np.float64)


def _check_frequency_column(path, freqs):
    if not np.allclose(freqs, FREQUENCIES, rtol=1e-6, atol=0):
        bad = int(np.argmax(~np.isclose(freqs, FREQUENCIES, rtol=1e-6, atol=0)))
        raise ParseError(f"frequency {freqs[bad]:g} does not match axis value {FREQUENCIES[bad]:.9g}", path, bad + 2)


def read_grid_csv(path):
    """Load a canonical-axis grid file as a validated :class:`WaiImage`."""
    pressures, freqs, values = read_table_csv(path)
    if pressures.size != N_PRESSURE or not np.allclose(pressures, PRESSURES):
        raise ParseError("header pressures are not the canonical -300..+200 daPa axis", path, 1)
    _check_frequency_column(path, freqs)
    img = WaiImage(values)
    bad = validate_image(img)
    if bad:
        raise ValidationError(f"{path}: {len(bad)} invariant violation(s), first: {bad[0].detail} at {bad[0].index}", bad)
    return img


def read_raw_csv(path):
    pressures, freqs, values = read_table_csv(path)
    _check_frequency_column(path, freqs)
    return RawMeasurement(pressures, values)


def write_raw_csv(path, raw):
    write_grid_csv(path, raw.absorbance, pressures=raw.pressures)


def read_mask_csv(path):
    _, _, values = read_table_csv(path)
    if values.shape != (N_FREQ, N_PRESSURE) or not np.isin(values, (0.0, 1.0)).all():
        raise ValidationError(f"{path}: mask must be a {N_FREQ}x{N_PRESSURE} grid of 0/1")
    return values.astype(bool)


def write_mask_csv(path, mask):
    write_grid_csv(path, np.asarray(mask, dtype=int), fmt=lambda v: str(int(v)))


# ---------------------------------------------------------- cohort on disk

MANIFEST = "manifest.json"


def save_cohort(cohort, path):
    """Write ``manifest.json`` plus one grid CSV per sample into directory *path*."""
    path = Path(path)
    path.mkdir(parents=True, exist_ok=True)
    width = max(4, len(str(len(cohort) - 1)))
    entries = []
    for i, (img, lab) in enumerate(zip(cohort.images, cohort.labels)):
        name = f"sample_{i:0{width}d}.csv"
        write_grid_csv(path / name, img)
        entries.append({"label": EarLabel(int(lab)).text, "grid_file": name})
    manifest = {"seed": cohort.seed, "generator": cohort.generator, "samples": entries}
    (path / MANIFEST).write_text(json.dumps(manifest, indent=1) + "\n")
    return path / MANIFEST


def load_cohort(path):
    """Load a cohort from a manifest file or the directory holding one."""
    path = Path(path)
    manifest_path = path / MANIFEST if path.is_dir() else path
    try:
        doc = json.loads(manifest_path.read_text())
    except json.JSONDecodeError as e:
        raise ParseError(f"invalid JSON: {e.msg}", manifest_path, e.lineno) from None
    if not isinstance(doc, dict) or not isinstance(doc.get("samples"), list):
        raise ParseError("manifest must be an object with a 'samples' list", manifest_path, 1)
    root = manifest_path.parent
    imgs, labels = [], []
    for k, entry in enumerate(doc["samples"]):
        if not isinstance(entry, dict) or "label" not in entry or "grid_file" not in entry:
            raise ParseError(f"sample {k}: needs 'label' and 'grid_file'", manifest_path, 0)
        labels.append(int(EarLabel.parse(entry["label"])))
        imgs.append(read_grid_csv(root / entry["grid_file"]).grid)
    if not imgs:
        raise ValidationError(f"{manifest_path}: cohort has no samples")
    seed = doc.get("seed")
    return Cohort(np.stack(imgs), labels, seed=None if seed is None else int(seed), generator=str(doc.get("generator", "")))


def ensure_dir(path):
    os.makedirs(path, exist_ok=True)
    return Path(path)
