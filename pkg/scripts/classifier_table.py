"""Cross-validate every classifier design on a synthetic cohort and write a
table with one row per (classifier, design).

    python scripts/classifier_table.py --out results/table --epochs 10
"""
import argparse
import json
import time
from pathlib import Path

from waiome.classifiers import ModelSpec
from waiome.classifiers.networks import TrainingConfig
from waiome.evaluation import cross_validate, table_csv
from waiome.synth import GeneratorConfig, generate_cohort

DESIGNS = [
    ("knn", dict(k=1)), ("knn", dict(k=3)), ("knn", dict(k=15)),
    ("svm", dict(kernel="linear")), ("svm", dict(kernel="poly3")), ("svm", dict(kernel="rbf")),
    ("svm", dict(kernel="sigmoid")),
    ("rf", dict(n_trees=10)), ("rf", dict(n_trees=100)), ("rf", dict(n_trees=500)),
    ("fnn1", {}), ("fnn2", {}), ("cnn1", {}), ("cnn2", {}),
]


def main():
    ap = argparse.ArgumentParser(description=__doc__, formatter_class=argparse.RawDescriptionHelpFormatter)
    ap.add_argument("--out", type=Path, default=Path("results/table"))
    ap.add_argument("--seed", type=int, default=7)
    ap.add_argument("--epochs", type=int, default=10, help="network epochs (30 is the full setting)")
    ap.add_argument("--skip", nargs="*", default=[], help="model names to leave out, e.g. cnn2 fnn2")
    ap.add_argument("--threads", type=int, default=1)
    args = ap.parse_args()

    cohort = generate_cohort(GeneratorConfig(seed=args.seed))
    training = TrainingConfig(epochs=args.epochs)
    args.out.mkdir(parents=True, exist_ok=True)
    rows, reports = [], {}
    for name, kw in DESIGNS:
        if name in args.skip:
            continue
        spec = ModelSpec.parse(name, **kw)
        t0 = time.time()
        rep = cross_validate(cohort, spec, training=training, seed=args.seed, n_jobs=args.threads)
        row = rep.table_row(spec.classifier, spec.design)
        rows.append(row)
        reports[f"{spec.classifier}-{spec.design}"] = rep.to_json()
        print(",".join(row.values()), f"({time.time() - t0:.0f}s)", flush=True)
        (args.out / "table.csv").write_text(table_csv(rows))
        (args.out / "reports.json").write_text(json.dumps(reports, indent=1, sort_keys=True) + "\n")


if __name__ == "__main__":
    main()
