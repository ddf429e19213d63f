"""Discriminative regions: RF importance surfaces, significance masks, their
overlap and the exported overlay files."""
from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .classifiers.features import flatten
from .classifiers.forest import AVERAGED_FOREST_SIZES, averaged_importance
from .grid import FREQUENCIES, PRESSURES, EarLabel, ParseError, write_grid_csv, write_mask_csv
from .stats import RegionMask, jaccard, region_mean, significance_map, top_fraction_of_scores, top_fraction_region

PGM_COMMENT = (
    "rows: frequency {f0:g}..{f1:g} Hz log-spaced, increasing downward; "
    "cols: pressure {p0:g}..{p1:g} daPa, increasing rightward"
)


@dataclass(frozen=True)
class BoundingBox:
    freq_min_hz: float
    freq_max_hz: float
    pressure_min_dapa: float
    pressure_max_dapa: float

    @classmethod
    def of(cls, mask):
        m = mask.mask if isinstance(mask, RegionMask) else np.asarray(mask, dtype=bool)
        if not m.any():
            raise ValueError("bounding box of an empty mask")
        fi, pi = np.nonzero(m)
        return cls(float(FREQUENCIES[fi.min()]), float(FREQUENCIES[fi.max()]),
                   float(PRESSURES[pi.min()]), float(PRESSURES[pi.max()]))

    def contains(self, other):
        return (self.freq_min_hz <= other.freq_min_hz and other.freq_max_hz <= self.freq_max_hz
                and self.pressure_min_dapa <= other.pressure_min_dapa and other.pressure_max_dapa <= self.pressure_max_dapa)

    def to_json(self):
        return dict(self.__dict__)


@dataclass(frozen=True)
class RegionReport:
    importance: np.ndarray  # 107 x 51, sums to 1
    z_map: np.ndarray
    p_map: np.ndarray
    sig_05: RegionMask
    sig_10: RegionMask
    importance_10: RegionMask
    region_means: dict  # mask name -> {"normal": m, "ome": m}
    jaccard_10: float
    importance_box: BoundingBox
    sig_05_box: BoundingBox
    sig_10_box: BoundingBox
    seed: int = 0

    def masks(self):
        return {"sig_05": self.sig_05, "sig_10": self.sig_10, "importance_10": self.importance_10}

    def summary(self):
        return {
            "seed": self.seed,
            "jaccard_importance10_sig10": self.jaccard_10,
            "importance_10_box": self.importance_box.to_json(),
            "sig_05_box": self.sig_05_box.to_json(),
            "sig_10_box": self.sig_10_box.to_json(),
            "region_means": self.region_means,
            "mask_counts": {k: m.count for k, m in self.masks().items()},
        }


def build_region_report(cohort, seed=0, sizes=AVERAGED_FOREST_SIZES, n_jobs=1):
    """Importance surface from forests of each size in ``sizes``, rank-sum
    significance masks at 5% and 10%, per-class region means and the overlap
    between the two methods."""
    X = flatten(cohort.images)
    importance = averaged_importance(X, cohort.labels, seed=seed, sizes=sizes, n_jobs=n_jobs)
    sig = significance_map(cohort)
    sig_05 = top_fraction_region(sig.p_map, 0.05)
    sig_10 = top_fraction_region(sig.p_map, 0.10)
    imp_10 = top_fraction_of_scores(importance, 0.10)
    means = {
        name: {lab.text: region_mean(cohort, m, lab) for lab in EarLabel}
        for name, m in (("sig_05", sig_05), ("sig_10", sig_10), ("importance_10", imp_10))
    }
    return RegionReport(
        importance=importance,
        z_map=sig.z_map,
        p_map=sig.p_map,
        sig_05=sig_05,
        sig_10=sig_10,
        importance_10=imp_10,
        region_means=means,
        jaccard_10=jaccard(imp_10, sig_10),
        importance_box=BoundingBox.of(imp_10),
        sig_05_box=BoundingBox.of(sig_05),
        sig_10_box=BoundingBox.of(sig_10),
        seed=int(seed),
    )


# ------------------------------------------------------------------- PGM


def scale_to_bytes(values):
    """Min-max scale to 0..255; a constant surface maps to 0."""
    v = np.asarray(values, dtype=np.float64)
    lo, hi = v.min(), v.max()
    if hi <= lo:
        return np.zeros(v.shape, dtype=np.uint8)
    return np.round((v - lo) / (hi - lo) * 255.0).astype(np.uint8)


def write_pgm(path, values, comment=None):
    """Binary P5 greymap, one pixel per grid point (51 wide x 107 tall)."""
    img = values if np.asarray(values).dtype == np.uint8 else scale_to_bytes(values)
    img = np.asarray(img, dtype=np.uint8)
    h, w = img.shape
    if comment is None:
        comment = PGM_COMMENT.format(f0=FREQUENCIES[0], f1=FREQUENCIES[-1], p0=PRESSURES[0], p1=PRESSURES[-1])
    header = f"P5\n# {comment}\n{w} {h}\n255\n".encode("ascii")
    Path(path).write_bytes(header + img.tobytes())


def read_pgm(path):
    """(pixels, comment) from a P5 file written by :func:`write_pgm`."""
    data = Path(path).read_bytes()
    tokens, comments, pos = [], [], 0
    while len(tokens) < 4:
        end = data.index(b"\n", pos)
        line = data[pos:end].decode("ascii")
        pos = end + 1
        if line.startswith("#"):
            comments.append(line[1:].strip())
        else:
            tokens += line.split()
    if tokens[0] != "P5":
        raise ParseError("not a binary PGM (P5)", path, 1)
    w, h, maxval = int(tokens[1]), int(tokens[2]), int(tokens[3])
    if maxval != 255:
        raise ParseError(f"unsupported maxval {maxval}", path)
    pix = np.frombuffer(data[pos : pos + w * h], dtype=np.uint8)
    if pix.size != w * h:
        raise ParseError("truncated pixel data", path)
    return pix.reshape(h, w), " ".join(comments)


def export_overlay(report, path):
    """Write the importance surface (PGM + CSV), the three masks (CSV + PGM)
    and ``summary.json`` into directory *path*. Returns the written paths."""
    out = Path(path)
    out.mkdir(parents=True, exist_ok=True)
    written = []
    write_pgm(out / "importance.pgm", report.importance)
    write_grid_csv(out / "importance.csv", report.importance)
    written += [out / "importance.pgm", out / "importance.csv"]
    for name, m in report.masks().items():
        write_mask_csv(out / f"mask_{name}.csv", m.mask)
        write_pgm(out / f"mask_{name}.pgm", m.mask.astype(np.uint8) * 255)
        written += [out / f"mask_{name}.csv", out / f"mask_{name}.pgm"]
    (out / "summary.json").write_text(json.dumps(report.summary(), indent=1, sort_keys=True) + "\n")
    written.append(out / "summary.json")
    return written
