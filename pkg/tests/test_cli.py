import csv
import json
import subprocess
import sys

import numpy as np
import pytest

from waiome.cli import build_parser, main
from waiome.grid import PRESSURES, RawMeasurement, load_cohort, write_grid_csv, write_raw_csv

SUBCOMMANDS = ("synth", "resample", "stats", "train", "predict", "cv", "sweep-weights", "regions")


def tree_bytes(root):
    return {p.relative_to(root).as_posix(): p.read_bytes() for p in sorted(root.rglob("*")) if p.is_file()}


@pytest.fixture(scope="module")
def cohort_dir(tmp_path_factory):
    out = tmp_path_factory.mktemp("cli") / "cohort"
    assert main(["synth", "--out", str(out), "--n-normal", "12", "--n-ome", "10", "--seed", "3"]) == 0
    return out


def test_synth_writes_requested_counts(cohort_dir):
    c = load_cohort(cohort_dir)
    assert c.counts() == (12, 10)
    assert json.loads((cohort_dir / "config.json").read_text())["seed"] == 3


def test_synth_single_class(tmp_path):
    assert main(["synth", "--out", str(tmp_path), "--n-normal", "5", "--n-ome", "0"]) == 0
    assert len(load_cohort(tmp_path)) == 5


def test_synth_rerun_is_byte_identical(tmp_path):
    args = ["synth", "--out", str(tmp_path / "a"), "--n-normal", "6", "--n-ome", "4", "--seed", "3"]
    assert main(args) == 0
    first = tree_bytes(tmp_path / "a")
    assert main(args) == 0
    assert tree_bytes(tmp_path / "a") == first
    args[2] = str(tmp_path / "b")
    assert main(args) == 0
    other = tree_bytes(tmp_path / "b")
    # only the recorded output path differs
    assert {k: v for k, v in other.items() if k != "config.json"} == {k: v for k, v in first.items() if k != "config.json"}


@pytest.mark.parametrize("cmd", SUBCOMMANDS)
def test_help_lists_defaults(cmd, capsys):
    assert main([cmd, "--help"]) == 0
    text = capsys.readouterr().out
    assert "--seed" in text and "--out" in text and "--threads" in text
    assert "(default: 7)" in text


def test_bad_flag_is_usage_error(capsys):
    assert main(["cv", "--bogus"]) == 2
    assert main(["synth", "--out", "x", "--separation", "2"]) == 2


def test_missing_input_is_io_error(tmp_path, capsys):
    assert main(["stats", "--cohort", str(tmp_path / "nope"), "--out", str(tmp_path / "o")]) == 3


def test_config_file_with_flag_override(tmp_path):
    cfg = tmp_path / "cfg.json"
    cfg.write_text(json.dumps({"n_normal": 4, "n_ome": 3, "seed": 1}))
    assert main(["synth", "--config", str(cfg), "--out", str(tmp_path / "a"), "--n-ome", "2"]) == 0
    assert load_cohort(tmp_path / "a").counts() == (4, 2)
    cfg.write_text(json.dumps({"no_such_option": 1}))
    assert main(["synth", "--config", str(cfg), "--out", str(tmp_path / "b")]) == 2


def test_resample_canonical_is_identity_and_reports_bad_rows(tmp_path, capsys):
    rng = np.random.default_rng(0)
    grid = np.round(rng.uniform(0, 1, (107, 51)), 6)
    src = tmp_path / "in"
    src.mkdir()
    write_grid_csv(src / "a.csv", grid)
    bad = grid[:, :20].copy()
    write_raw_csv(src / "b.csv", RawMeasurement(PRESSURES[:20][::-1], bad))
    code = main(["resample", str(src), "--out", str(tmp_path / "out")])
    assert code == 4
    assert "b.csv" in capsys.readouterr().err
    assert (tmp_path / "out" / "a.csv").read_bytes() == (src / "a.csv").read_bytes()
    report = json.loads((tmp_path / "out" / "validation.json").read_text())
    assert report["a.csv"]["ok"] and not report["b.csv"]["ok"]


def test_stats_outputs(cohort_dir, tmp_path):
    assert main(["stats", "--cohort", str(cohort_dir), "--out", str(tmp_path)]) == 0
    summary = json.loads((tmp_path / "summary.json").read_text())
    assert summary["mask_sig_05_count"] == 273 and summary["mask_sig_10_count"] == 546
    assert (tmp_path / "p_map.csv").exists() and (tmp_path / "mask_sig_10.pgm").exists()


def test_cv_prints_table_row(cohort_dir, tmp_path, capsys):
    args = ["cv", "--model", "knn", "--k", "3", "--cohort", str(cohort_dir), "--out", str(tmp_path / "a")]
    assert main(args) == 0
    row = capsys.readouterr().out.strip().split(",")
    assert row[:2] == ["KNN", "3"] and len(row) == 10
    assert all(0.0 <= float(v) <= 1.0 for v in row[2:])
    args[-1] = str(tmp_path / "b")
    assert main(args) == 0
    a, b = tree_bytes(tmp_path / "a"), tree_bytes(tmp_path / "b")
    assert a["report.json"] == b["report.json"] and a["table.csv"] == b["table.csv"]


def test_train_then_predict(cohort_dir, tmp_path, capsys):
    assert main(["train", "--model", "cnn1", "--epochs", "1", "--cohort", str(cohort_dir), "--out", str(tmp_path)]) == 0
    capsys.readouterr()
    sample = sorted(p for p in cohort_dir.rglob("*.csv") if p.name != "manifest.csv")[0]
    assert main(["predict", "--model-file", str(tmp_path / "model.json"), str(sample)]) == 0
    name, label, prob = capsys.readouterr().out.strip().split(",")
    assert label in ("normal", "ome") and 0.0 <= float(prob) <= 1.0


def test_sweep_three_weights(cohort_dir, tmp_path):
    args = ["sweep-weights", "--cohort", str(cohort_dir), "--weights", "1.0,1.35,1.7", "--repeats", "1",
            "--epochs", "1", "--out", str(tmp_path)]
    assert main(args) == 0
    rows = list(csv.DictReader((tmp_path / "sweep.csv").open()))
    assert [r["ome_weight"] for r in rows] == ["1", "1.35", "1.7"]


def test_weight_below_one_is_usage_error(cohort_dir, tmp_path):
    args = ["sweep-weights", "--cohort", str(cohort_dir), "--weights", "0.5", "--out", str(tmp_path)]
    assert main(args) == 2


def test_regions_overlay(cohort_dir, tmp_path):
    assert main(["regions", "--cohort", str(cohort_dir), "--trees", "10", "--out", str(tmp_path)]) == 0
    names = set(tree_bytes(tmp_path))
    assert {"importance.pgm", "importance.csv", "mask_sig_05.csv", "mask_sig_10.csv", "summary.json"} <= names


def test_console_script_entry_point():
    r = subprocess.run([sys.executable, "-m", "waiome.cli", "--version"], capture_output=True, text=True)
    assert r.returncode == 0 and "waiome" in r.stdout


def test_parser_knows_every_subcommand():
    extra = {"resample": ["x"], "predict": ["--model-file", "m"], "synth": []}
    parser = build_parser()
    for cmd in SUBCOMMANDS:
        args = parser.parse_args([cmd] + extra.get(cmd, ["--cohort", "c"]))
        assert args.seed == 7 and callable(args.func)
