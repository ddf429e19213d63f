import json

import numpy as np
import pytest

from waiome.grid import Cohort, EarLabel, read_mask_csv
from waiome.regions import BoundingBox, build_region_report, export_overlay, read_pgm, scale_to_bytes, write_pgm
from waiome.stats import region_mean, significance_map, top_fraction_region

BAND = (slice(20, 41), slice(10, 21))  # frequency rows 20-40, pressure columns 10-20


def planted_band_cohort(seed=0, n=60, shift=0.15):
    rng = np.random.default_rng(seed)
    imgs = 0.5 + 0.1 * rng.standard_normal((2 * n, 107, 51))
    imgs[n:, BAND[0], BAND[1]] -= shift
    imgs = np.clip(imgs, 0, 1)
    return Cohort(imgs, [0] * n + [1] * n, seed=seed, generator="planted band")


@pytest.fixture(scope="module")
def report(small_cohort):
    return build_region_report(small_cohort, seed=1, sizes=(10, 20))


def test_report_shapes_and_counts(report):
    assert report.importance.shape == (107, 51)
    assert abs(report.importance.sum() - 1) <= 1e-9
    assert (report.sig_05.count, report.sig_10.count, report.importance_10.count) == (273, 546, 546)
    assert 0.0 <= report.jaccard_10 <= 1.0


def test_report_is_reproducible(report, small_cohort):
    again = build_region_report(small_cohort, seed=1, sizes=(10, 20))
    assert np.array_equal(again.importance, report.importance)
    assert again.summary() == report.summary()


def test_bounding_boxes(report):
    assert report.sig_10_box.contains(report.sig_05_box)
    fi, pi = np.nonzero(report.importance_10.mask)
    box = report.importance_box
    from waiome.grid import FREQUENCIES, PRESSURES

    assert np.all((FREQUENCIES[fi] >= box.freq_min_hz) & (FREQUENCIES[fi] <= box.freq_max_hz))
    assert np.all((PRESSURES[pi] >= box.pressure_min_dapa) & (PRESSURES[pi] <= box.pressure_max_dapa))
    with pytest.raises(ValueError):
        BoundingBox.of(np.zeros((107, 51), bool))


def test_export_round_trip(report, small_cohort, tmp_path):
    export_overlay(report, tmp_path)
    for name, m in report.masks().items():
        assert np.array_equal(read_mask_csv(tmp_path / f"mask_{name}.csv"), m.mask)
    pix, comment = read_pgm(tmp_path / "importance.pgm")
    assert pix.shape == (107, 51) and pix.max() == 255 and pix.min() == 0
    assert "frequency" in comment and "pressure" in comment
    summary = json.loads((tmp_path / "summary.json").read_text())
    for name, m in report.masks().items():
        for lab in EarLabel:
            assert abs(summary["region_means"][name][lab.text] - region_mean(small_cohort, m, lab)) <= 1e-12
    assert summary["mask_counts"]["sig_05"] == 273


def test_constant_surface_pgm(tmp_path):
    write_pgm(tmp_path / "c.pgm", np.full((107, 51), 0.3))
    pix, _ = read_pgm(tmp_path / "c.pgm")
    assert np.unique(pix).tolist() == [0]
    assert scale_to_bytes(np.array([[1.0, 3.0]])).tolist() == [[0, 255]]


def test_planted_band_is_fully_recovered():
    cohort = planted_band_cohort()
    mask = top_fraction_region(significance_map(cohort).p_map, 0.05).mask
    band = np.zeros((107, 51), bool)
    band[BAND] = True
    # the band (231 points) is smaller than the 5% mask (273), so it must be
    # contained in the mask and fill all but 42 of its points
    assert np.all(mask[band])
    assert mask[band].sum() / mask.sum() == pytest.approx(231 / 273)


def test_planted_band_means_and_importance():
    cohort = planted_band_cohort(n=30, shift=0.3)
    rep = build_region_report(cohort, seed=0, sizes=(10,))
    normal, ome = rep.region_means["sig_05"]["normal"], rep.region_means["sig_05"]["ome"]
    assert normal > ome
    band = np.zeros((107, 51), bool)
    band[BAND] = True
    assert rep.importance[band].sum() > 0.9
