"""OME class-weight sweep for a network: recall and precision of both
classes at each weight, averaged over three seeds.

    python scripts/weight_sweep.py --weights 1.0,1.35,1.7,2.5 --out results/sweep
"""
import argparse
import csv
from pathlib import Path

from waiome.classifiers import ModelSpec
from waiome.classifiers.networks import TrainingConfig
from waiome.evaluation import weight_sweep
from waiome.synth import GeneratorConfig, generate_cohort

COLUMNS = ("recall_ome", "recall_normal", "precision_ome", "precision_normal", "accuracy", "auc_roc")


def main():
    ap = argparse.ArgumentParser(description=__doc__, formatter_class=argparse.RawDescriptionHelpFormatter)
    ap.add_argument("--model", default="cnn2s")
    ap.add_argument("--weights", default="1.0,1.7")
    ap.add_argument("--epochs", type=int, default=10)
    ap.add_argument("--repeats", type=int, default=3)
    ap.add_argument("--seed", type=int, default=7)
    ap.add_argument("--out", type=Path, default=Path("results/sweep"))
    args = ap.parse_args()

    weights = [float(w) for w in args.weights.split(",")]
    cohort = generate_cohort(GeneratorConfig(seed=args.seed))
    results = weight_sweep(cohort, ModelSpec.parse(args.model), weights, training=TrainingConfig(epochs=args.epochs),
                           repeats=args.repeats, seed=args.seed)
    args.out.mkdir(parents=True, exist_ok=True)
    with open(args.out / "sweep.csv", "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(("ome_weight",) + COLUMNS + tuple(f"{c}_sd" for c in COLUMNS))
        for weight, rep in results:
            w.writerow([weight] + [f"{getattr(rep, c):.4f}" for c in COLUMNS] + [f"{rep.spread[c]:.4f}" for c in COLUMNS])
            print(f"w={weight:g}  " + "  ".join(f"{c}={getattr(rep, c):.3f}" for c in COLUMNS), flush=True)


if __name__ == "__main__":
    main()
