"""``waiome`` command-line entry point.

Exit codes: 0 success, 2 usage, 3 I/O failure, 4 data validation,
5 numeric failure (NaN loss, SVM non-convergence).
"""
from __future__ import annotations

import argparse
import json
import logging
import sys
from pathlib import Path

import numpy as np

from . import __version__
from .classifiers.forest import AVERAGED_FOREST_SIZES
from .classifiers.models import ModelSpec, fit_model, load_model, save_model
from .classifiers.networks import ARCHITECTURES, TrainingConfig, TrainingError
from .classifiers.svm import KERNELS, SVMError
from .evaluation import FoldError, cross_validate, report_json, table_csv, weight_sweep
from .grid import ParseError, ValidationError, load_cohort, read_grid_csv, read_raw_csv, save_cohort, write_grid_csv, write_mask_csv
from .pchip import PchipError, resample_pressure
from .regions import build_region_report, export_overlay, write_pgm
from .stats import class_moment_maps, significance_map, top_fraction_region
from .synth import GeneratorConfig, generate_cohort, load_profile

EXIT_OK, EXIT_USAGE, EXIT_IO, EXIT_VALIDATION, EXIT_NUMERIC = 0, 2, 3, 4, 5
CONFIG_FILE = "config.json"
MODEL_CHOICES = ("knn", "svm", "rf") + tuple(ARCHITECTURES)

log = logging.getLogger("waiome")


class UsageError(Exception):
    pass


def _floats(text):
    try:
        return [float(t) for t in text.split(",") if t.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated numbers, got {text!r}") from None


def _ints(text):
    try:
        return [int(t) for t in text.split(",") if t.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated integers, got {text!r}") from None


# ---------------------------------------------------------------- parser


def _common():
    p = argparse.ArgumentParser(add_help=False)
    g = p.add_argument_group("global options")
    g.add_argument("--seed", type=int, default=7, help="top-level seed; every random stream derives from it")
    g.add_argument("--threads", type=int, default=1, help="maximum parallel workers")
    g.add_argument("--config", type=Path, default=None, help="JSON file of option defaults (flags override it)")
    g.add_argument("--out", type=Path, default=None, help="output directory")
    g.add_argument("-v", "--verbose", action="store_true", help="log progress to stderr")
    return p


def _model_args(p):
    g = p.add_argument_group("model")
    g.add_argument("--model", choices=MODEL_CHOICES, default="knn", help="classifier family or network architecture")
    g.add_argument("--k", type=int, default=15, help="KNN neighbours")
    g.add_argument("--kernel", choices=KERNELS, default="rbf", help="SVM kernel")
    g.add_argument("--n-trees", type=int, default=100, help="RF forest size")
    _training_args(p)


def _training_args(p):
    d = TrainingConfig()
    g = p.add_argument_group("network training")
    g.add_argument("--epochs", type=int, default=d.epochs)
    g.add_argument("--batch-size", type=int, default=d.batch_size)
    g.add_argument("--learning-rate", type=float, default=d.learning_rate)
    g.add_argument("--ome-weight", type=float, default=d.ome_class_weight, help="OME class weight in the loss")


def build_parser():
    fmt = argparse.ArgumentDefaultsHelpFormatter
    common = _common()
    parser = argparse.ArgumentParser(prog="waiome", description="Wideband absorbance grid pipeline.", formatter_class=fmt)
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True, metavar="command")

    def add(name, func, help):
        p = sub.add_parser(name, parents=[common], help=help, description=help, formatter_class=fmt)
        p.set_defaults(func=func)
        return p

    p = add("synth", cmd_synth, "generate a synthetic labelled cohort")
    p.add_argument("--n-normal", type=int, default=423)
    p.add_argument("--n-ome", type=int, default=249)
    p.add_argument("--separation", type=float, default=1.0, help="0 = identical classes, 1 = default class gap")
    p.add_argument("--heterogeneity", type=float, default=GeneratorConfig.heterogeneity, help="sd of per-ear severity")
    p.add_argument("--normal-profile", type=Path, default=None, help="ClassProfile JSON for normal ears")
    p.add_argument("--ome-profile", type=Path, default=None, help="ClassProfile JSON for OME ears")

    p = add("resample", cmd_resample, "resample raw measurement CSVs onto the canonical pressure axis")
    p.add_argument("inputs", nargs="+", type=Path, help="raw measurement CSV files or directories of them")

    p = add("stats", cmd_stats, "class moment maps, rank-sum z/p maps and significance masks")
    p.add_argument("--cohort", type=Path, required=True)

    p = add("train", cmd_train, "fit one model on a whole cohort and save it")
    p.add_argument("--cohort", type=Path, required=True)
    _model_args(p)

    p = add("predict", cmd_predict, "score grid CSV files (or a cohort) with a saved model")
    p.add_argument("--model-file", type=Path, required=True)
    p.add_argument("inputs", nargs="*", type=Path, help="grid CSV files")
    p.add_argument("--cohort", type=Path, default=None, help="score every sample of this cohort instead")

    p = add("cv", cmd_cv, "10-fold cross-validation of one model")
    p.add_argument("--cohort", type=Path, required=True)
    _model_args(p)
    p.add_argument("--repeats", type=int, default=None, help="repeats (default: 3 for RF/FNN/CNN, 1 otherwise)")
    p.add_argument("--fold-averaged", action="store_true", help="average per-fold metrics instead of pooling predictions")

    p = add("sweep-weights", cmd_sweep_weights, "cross-validate a network at several OME class weights")
    p.add_argument("--cohort", type=Path, required=True)
    p.add_argument("--model", choices=tuple(ARCHITECTURES), default="cnn2s")
    p.add_argument("--weights", type=_floats, default=[1.0, 1.7], help="comma-separated class weights")
    p.add_argument("--repeats", type=int, default=3)
    _training_args(p)

    p = add("regions", cmd_regions, "RF importance surface, significance masks and overlays")
    p.add_argument("--cohort", type=Path, required=True)
    p.add_argument("--trees", type=_ints, default=list(AVERAGED_FOREST_SIZES), help="forest sizes to average")
    return parser


def parse_args(argv=None):
    """Parse twice: once to find ``--config``, then with its values installed
    as defaults so explicit flags still win."""
    parser = build_parser()
    args = parser.parse_args(argv)
    if args.config is not None:
        try:
            doc = json.loads(Path(args.config).read_text())
        except OSError as e:
            raise OSError(f"cannot read config {args.config}: {e}") from e
        except json.JSONDecodeError as e:
            raise ParseError(f"invalid JSON: {e.msg}", args.config, e.lineno) from None
        if not isinstance(doc, dict):
            raise ParseError("config must be a JSON object", args.config, 1)
        known = vars(args)
        defaults = {}
        for key, value in doc.items():
            dest = key.replace("-", "_")
            if dest in ("command", "func", "config"):
                continue
            if dest not in known:
                parser.error(f"unknown key {key!r} in {args.config}")
            if dest in ("out", "cohort", "model_file", "normal_profile", "ome_profile") and value is not None:
                value = Path(value)
            defaults[dest] = value
        sub = parser._subparsers._group_actions[0].choices[args.command]
        sub.set_defaults(**defaults)
        args = parser.parse_args(argv)
    return args


def resolved_config(args):
    out = {}
    for k, v in sorted(vars(args).items()):
        if k in ("func", "config", "verbose"):
            continue
        if isinstance(v, Path):
            v = str(v)
        elif isinstance(v, list):
            v = [str(x) if isinstance(x, Path) else x for x in v]
        out[k] = v
    return out


def write_config(args, out):
    out.mkdir(parents=True, exist_ok=True)
    (out / CONFIG_FILE).write_text(json.dumps(resolved_config(args), indent=1, sort_keys=True) + "\n")


def _need_out(args):
    if args.out is None:
        raise UsageError(f"{args.command}: --out is required")
    return args.out


def _spec(args):
    return ModelSpec.parse(args.model, k=args.k, kernel=args.kernel, n_trees=args.n_trees)


def _training(args, **over):
    kw = dict(epochs=args.epochs, batch_size=args.batch_size, learning_rate=args.learning_rate,
              ome_class_weight=args.ome_weight, seed=args.seed)
    kw.update(over)
    return TrainingConfig(**kw)


# -------------------------------------------------------------- commands


def cmd_synth(args):
    out = _need_out(args)
    profiles = {
        "normal_profile": load_profile(args.normal_profile) if args.normal_profile else None,
        "ome_profile": load_profile(args.ome_profile) if args.ome_profile else None,
    }
    try:
        cfg = GeneratorConfig(n_normal=args.n_normal, n_ome=args.n_ome, seed=args.seed, separation=args.separation,
                              heterogeneity=args.heterogeneity, **profiles)
    except ValidationError as e:  # out-of-range flag values
        raise UsageError(str(e)) from None
    cohort = generate_cohort(cfg)
    save_cohort(cohort, out)
    write_config(args, out)
    log.info("wrote %d samples (%d normal, %d ome) to %s", len(cohort), *cohort.counts(), out)
    return EXIT_OK


def _expand(inputs, pattern="*.csv"):
    files = []
    for p in inputs:
        files += sorted(p.glob(pattern)) if p.is_dir() else [p]
    return files


def cmd_resample(args):
    out = _need_out(args)
    out.mkdir(parents=True, exist_ok=True)
    report, failed = {}, []
    for path in _expand(args.inputs):
        try:
            img = resample_pressure(read_raw_csv(path))
        except ValidationError as e:
            report[path.name] = {"ok": False, "errors": [str(v) for v in e.violations] or [str(e)]}
            failed.append(path)
            continue
        except (ParseError, PchipError) as e:
            report[path.name] = {"ok": False, "errors": [str(e)]}
            failed.append(path)
            continue
        write_grid_csv(out / path.name, img.grid)
        report[path.name] = {"ok": True, "errors": []}
    (out / "validation.json").write_text(json.dumps(report, indent=1, sort_keys=True) + "\n")
    write_config(args, out)
    for path in failed:
        first = report[path.name]["errors"][0]
        print(f"{path}: {first}", file=sys.stderr)
    return EXIT_VALIDATION if failed else EXIT_OK


def cmd_stats(args):
    out = _need_out(args)
    out.mkdir(parents=True, exist_ok=True)
    cohort = load_cohort(args.cohort)
    surf = class_moment_maps(cohort).merged(significance_map(cohort))
    for name in ("mean_normal", "var_normal", "mean_ome", "var_ome", "z_map", "p_map"):
        write_grid_csv(out / f"{name}.csv", getattr(surf, name))
    summary = {"n_normal": cohort.counts()[0], "n_ome": cohort.counts()[1]}
    for frac, tag in ((0.05, "05"), (0.10, "10")):
        m = top_fraction_region(surf.p_map, frac)
        write_mask_csv(out / f"mask_sig_{tag}.csv", m.mask)
        write_pgm(out / f"mask_sig_{tag}.pgm", m.mask.astype(np.uint8) * 255)
        summary[f"mask_sig_{tag}_count"] = m.count
    for alpha in (0.05, 0.0005):
        summary[f"fraction_p_below_{alpha:g}"] = float((surf.p_map < alpha).mean())
    summary["z_quantiles"] = {f"q{q:g}": float(np.quantile(surf.z_map, q / 100)) for q in (0, 5, 25, 50, 75, 95, 100)}
    (out / "summary.json").write_text(json.dumps(summary, indent=1, sort_keys=True) + "\n")
    write_config(args, out)
    print(f"p<0.0005 fraction {summary['fraction_p_below_0.0005']:.4f}")
    return EXIT_OK


def cmd_train(args):
    out = _need_out(args)
    cohort = load_cohort(args.cohort)
    spec = _spec(args)
    model = fit_model(spec, cohort.images, cohort.labels, seed=args.seed, training=_training(args),
                      n_jobs=args.threads, log=log.info)
    out.mkdir(parents=True, exist_ok=True)
    save_model(model, out / "model.json")
    write_config(args, out)
    print(f"trained {spec.classifier} {spec.design} on {len(cohort)} samples -> {out / 'model.json'}")
    return EXIT_OK


def cmd_predict(args):
    model = load_model(args.model_file)
    if args.cohort is not None:
        cohort = load_cohort(args.cohort)
        names = [f"sample_{i}" for i in range(len(cohort))]
        images = cohort.images
    elif args.inputs:
        files = _expand(args.inputs)
        names = [str(f) for f in files]
        images = np.stack([read_grid_csv(f).grid for f in files])
    else:
        raise UsageError("predict: give grid files or --cohort")
    labels, proba = model.predict(images)
    lines = [f"{n},{'ome' if lab else 'normal'},{p:.6f}" for n, lab, p in zip(names, labels, proba)]
    for line in lines:
        print(line)
    if args.out is not None:
        args.out.mkdir(parents=True, exist_ok=True)
        (args.out / "predictions.csv").write_text("input,label,probability_ome\n" + "\n".join(lines) + "\n")
        write_config(args, args.out)
    return EXIT_OK


def cmd_cv(args):
    out = _need_out(args)
    cohort = load_cohort(args.cohort)
    spec = _spec(args)
    rep = cross_validate(cohort, spec, training=_training(args), repeats=args.repeats, seed=args.seed,
                         pooled=not args.fold_averaged, n_jobs=args.threads)
    out.mkdir(parents=True, exist_ok=True)
    (out / "report.json").write_text(report_json(rep))
    row = rep.table_row(spec.classifier, spec.design)
    (out / "table.csv").write_text(table_csv([row]))
    write_config(args, out)
    print(",".join(str(v) for v in row.values()))
    return EXIT_OK


def cmd_sweep_weights(args):
    out = _need_out(args)
    cohort = load_cohort(args.cohort)
    spec = ModelSpec.parse(args.model)
    results = weight_sweep(cohort, spec, args.weights, training=_training(args), repeats=args.repeats,
                           seed=args.seed, n_jobs=args.threads)
    rows = []
    for w, rep in results:
        rows.append({"ome_weight": f"{w:g}", **rep.table_row(spec.classifier, spec.design)})
        print(f"w={w:g} recall_ome={rep.recall_ome:.4f} recall_normal={rep.recall_normal:.4f} accuracy={rep.accuracy:.4f}")
    out.mkdir(parents=True, exist_ok=True)
    (out / "sweep.csv").write_text(table_csv(rows))
    (out / "sweep.json").write_text(report_json([{"ome_weight": w, "report": r.to_json()} for w, r in results]))
    write_config(args, out)
    return EXIT_OK


def cmd_regions(args):
    out = _need_out(args)
    cohort = load_cohort(args.cohort)
    report = build_region_report(cohort, seed=args.seed, sizes=tuple(args.trees), n_jobs=args.threads)
    export_overlay(report, out)
    write_config(args, out)
    box = report.importance_box
    print(
        f"importance top-10% box: {box.freq_min_hz:.0f}-{box.freq_max_hz:.0f} Hz, "
        f"{box.pressure_min_dapa:+.0f}..{box.pressure_max_dapa:+.0f} daPa; jaccard {report.jaccard_10:.3f}"
    )
    return EXIT_OK


# ------------------------------------------------------------------ main


def main(argv=None):
    try:
        args = parse_args(argv)
    except SystemExit as e:  # argparse usage errors and --help
        return int(e.code or 0)
    except OSError as e:
        print(f"error: {e}", file=sys.stderr)
        return EXIT_IO
    except (ParseError, ValidationError) as e:
        print(f"error: {e}", file=sys.stderr)
        return EXIT_VALIDATION
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(message)s", stream=sys.stderr)
    try:
        return args.func(args)
    except UsageError as e:
        print(f"error: {e}", file=sys.stderr)
        return EXIT_USAGE
    except FoldError as e:
        print(f"error: {e}", file=sys.stderr)
        return EXIT_NUMERIC if e.numeric else EXIT_VALIDATION
    except (TrainingError, SVMError, FloatingPointError) as e:
        print(f"error: {e}", file=sys.stderr)
        return EXIT_NUMERIC
    except (ParseError, ValidationError, PchipError) as e:
        print(f"error: {e}", file=sys.stderr)
        return EXIT_VALIDATION
    except OSError as e:
        print(f"error: {e}", file=sys.stderr)
        return EXIT_IO
    except ValueError as e:
        print(f"error: {e}", file=sys.stderr)
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
