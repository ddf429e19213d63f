"""Stratified k-fold cross-validation, confusion metrics, ROC-AUC and the
class-weight sweep."""
from __future__ import annotations

import csv
import io
import json
from dataclasses import asdict, dataclass, field, replace

import numpy as np
from joblib import Parallel, delayed

from . import seeding
from .classifiers.models import fit_model
from .classifiers.networks import TrainingConfig, TrainingError
from .classifiers.svm import SVMError
from .grid import ValidationError
from .stats import midranks

N_FOLDS = 10
STOCHASTIC_REPEATS = 3
METRICS = (
    "auc_roc", "precision_normal", "precision_ome", "recall_normal", "recall_ome",
    "f1_normal", "f1_ome", "accuracy",
)
TABLE_COLUMNS = ("classifier", "design") + METRICS


class FoldError(RuntimeError):
    """A model failed inside cross-validation; ``numeric`` marks NaN or
    non-convergence failures."""

    def __init__(self, cause, fold, repeat):
        self.cause, self.fold, self.repeat = cause, fold, repeat
        self.numeric = isinstance(cause, (TrainingError, SVMError, FloatingPointError))
        super().__init__(f"repeat {repeat}, fold {fold}: {cause}")


@dataclass(frozen=True)
class FoldPlan:
    folds: tuple  # tuple of sorted index arrays
    seed: int

    def test(self, k):
        return self.folds[k]

    def train(self, k):
        return np.sort(np.concatenate([f for i, f in enumerate(self.folds) if i != k]))

    def __len__(self):
        return len(self.folds)


def make_folds(labels, seed, n_folds=N_FOLDS):
    """Shuffle each class with its own seeded stream, then deal round-robin.
    The OME deal starts at the fold after the last Normal, keeping fold
    sizes within one of each other."""
    labels = np.asarray(getattr(labels, "labels", labels))
    buckets = [[] for _ in range(n_folds)]
    pos = 0
    for cls in (0, 1):
        idx = np.flatnonzero(labels == cls)
        if idx.size < n_folds:
            raise ValidationError(f"class {cls} has {idx.size} samples; {n_folds}-fold CV needs at least {n_folds}")
        idx = seeding.rng(seed, "cv.folds", cls).permutation(idx)
        for i in idx:
            buckets[pos % n_folds].append(int(i))
            pos += 1
    return FoldPlan(tuple(np.sort(np.array(b, dtype=np.int64)) for b in buckets), int(seed))


@dataclass
class EvalReport:
    tp: int
    fp: int
    fn: int
    tn: int
    precision_normal: float
    precision_ome: float
    recall_normal: float
    recall_ome: float
    f1_normal: float
    f1_ome: float
    accuracy: float
    auc_roc: float | None = None
    flags: list = field(default_factory=list)
    spread: dict = field(default_factory=dict)  # metric -> sample std over repeats
    repeats: list = field(default_factory=list)  # per-repeat reports (as dicts)
    meta: dict = field(default_factory=dict)

    def metric(self, name):
        return getattr(self, name)

    def to_json(self):
        return asdict(self)

    def table_row(self, classifier, design):
        row = {"classifier": classifier, "design": design}
        for m in METRICS:
            v = getattr(self, m)
            row[m] = "" if v is None else f"{v:.4f}"
        return row


def _ratio(num, den, flag, flags):
    if den == 0:
        flags.append(flag)
        return 0.0
    return num / den


def _f1(p, r):
    return 0.0 if p + r == 0 else 2.0 * p * r / (p + r)


def confusion_metrics(labels, predictions):
    """Label metrics with OME as the positive class. Zero denominators give
    0 and add a flag naming the metric."""
    y = np.asarray(labels).astype(np.int64).ravel()
    yhat = np.asarray(predictions).astype(np.int64).ravel()
    if y.shape != yhat.shape:
        raise ValueError(f"length mismatch: {y.size} labels vs {yhat.size} predictions")
    tp = int(np.sum((y == 1) & (yhat == 1)))
    fp = int(np.sum((y == 0) & (yhat == 1)))
    fn = int(np.sum((y == 1) & (yhat == 0)))
    tn = int(np.sum((y == 0) & (yhat == 0)))
    flags = []
    p_ome = _ratio(tp, tp + fp, "precision_ome_undefined", flags)
    r_ome = _ratio(tp, tp + fn, "recall_ome_undefined", flags)
    p_norm = _ratio(tn, tn + fn, "precision_normal_undefined", flags)
    r_norm = _ratio(tn, tn + fp, "recall_normal_undefined", flags)
    if r_ome == 0.0 and tp + fn > 0:
        flags.append("recall_ome_zero")
    if r_norm == 0.0 and tn + fp > 0:
        flags.append("recall_normal_zero")
    total = tp + fp + fn + tn
    return EvalReport(
        tp, fp, fn, tn,
        precision_normal=p_norm, precision_ome=p_ome,
        recall_normal=r_norm, recall_ome=r_ome,
        f1_normal=_f1(p_norm, r_norm), f1_ome=_f1(p_ome, r_ome),
        accuracy=(tp + tn) / total if total else 0.0,
        flags=flags,
    )


def roc_auc(labels, scores):
    """Rank-based AUC: P(score_OME > score_Normal) + 0.5 P(tie)."""
    y = np.asarray(labels).astype(np.int64).ravel()
    s = np.asarray(scores, dtype=np.float64).ravel()
    if y.shape != s.shape:
        raise ValueError("labels and scores differ in length")
    n1 = int(y.sum())
    n0 = y.size - n1
    if n1 == 0 or n0 == 0:
        raise ValueError("AUC needs both classes")
    ranks, _ = midranks(s)
    u = ranks[y == 1].sum() - n1 * (n1 + 1) / 2.0
    return float(u / (n1 * n0))


def _fit_fold(cohort, spec, plan, k, r, seed, training):
    tr, te = plan.train(k), plan.test(k)
    try:
        model = fit_model(spec, cohort.images[tr], cohort.labels[tr], seed=seeding.child_seed(seed, "cv.model", r, k),
                          training=training)
        labels, _ = model.predict(cohort.images[te])
        scores = model.scores(cohort.images[te])
    except (TrainingError, SVMError, ValueError, FloatingPointError) as e:
        raise FoldError(e, k, r) from e
    return te, labels, scores


def _report(y, pred, scores):
    rep = confusion_metrics(y, pred)
    rep.auc_roc = roc_auc(y, scores)
    return rep


def _average(reports):
    """Mean of every metric and of the confusion counts, with sample std."""
    out = {}
    for m in METRICS:
        vals = np.array([getattr(r, m) for r in reports], dtype=np.float64)
        out[m] = (float(vals.mean()), float(vals.std(ddof=1)) if vals.size > 1 else 0.0)
    return out


def cross_validate(cohort, spec, training=None, repeats=None, seed=0, n_folds=N_FOLDS, pooled=True, n_jobs=1):
    """Stratified CV with a per-fold standardizer.

    Stochastic families (RF, FNN, CNN) run ``repeats`` (default 3) times with
    distinct model seeds over the same folds; deterministic ones run once.
    Metrics come from predictions pooled over folds unless ``pooled=False``,
    in which case each fold is scored and the fold metrics averaged.
    The headline metrics are means over repeats; ``spread`` is their std.
    """
    plan = make_folds(cohort.labels, seed, n_folds)
    if repeats is None:
        repeats = STOCHASTIC_REPEATS if spec.stochastic else 1
    tasks = [(r, k) for r in range(repeats) for k in range(n_folds)]
    run = delayed(_fit_fold)
    if n_jobs == 1:
        results = [_fit_fold(cohort, spec, plan, k, r, seed, training) for r, k in tasks]
    else:
        results = Parallel(n_jobs=n_jobs)(run(cohort, spec, plan, k, r, seed, training) for r, k in tasks)
    y = cohort.labels.astype(np.int64)
    per_repeat = []
    for r in range(repeats):
        chunk = results[r * n_folds : (r + 1) * n_folds]
        pred = np.full(y.size, -1, dtype=np.int64)
        score = np.full(y.size, np.nan)
        for te, lab, sc in chunk:
            pred[te] = lab
            score[te] = sc
        rep = _report(y, pred, score)
        if not pooled:
            for m, (mean, _) in _average([_report(y[te], lab, sc) for te, lab, sc in chunk]).items():
                setattr(rep, m, mean)
        per_repeat.append(rep)
    head = per_repeat[0] if repeats == 1 else _pooled_counts(per_repeat)
    stats = _average(per_repeat)
    for m, (mean, sd) in stats.items():
        setattr(head, m, mean)
        head.spread[m] = sd
    head.flags = sorted({f for r in per_repeat for f in r.flags})
    head.repeats = [{k: v for k, v in r.to_json().items() if k not in ("repeats", "spread", "meta")} for r in per_repeat]
    head.meta = {
        "spec": spec.to_json(),
        "seed": int(seed),
        "n_folds": n_folds,
        "n_repeats": repeats,
        "pooled": pooled,
        "training": None if training is None else training.to_json(),
        "n_samples": int(y.size),
    }
    return head


def _pooled_counts(reports):
    """Confusion counts summed over repeats (metrics are overwritten later)."""
    tot = [sum(getattr(r, f) for r in reports) for f in ("tp", "fp", "fn", "tn")]
    return replace(reports[0], tp=tot[0], fp=tot[1], fn=tot[2], tn=tot[3], flags=[], spread={}, repeats=[], meta={})


def weight_sweep(cohort, spec, weights, training=None, repeats=STOCHASTIC_REPEATS, seed=0, n_jobs=1):
    """Cross-validate a network at each OME class weight. Folds and model
    seeds are shared across weights so only the loss weighting differs."""
    base = training or TrainingConfig()
    out = []
    for w in weights:
        if w < 1.0:
            raise ValueError(f"class weight {w} < 1")
        cfg = replace(base, ome_class_weight=float(w))
        out.append((float(w), cross_validate(cohort, spec, training=cfg, repeats=repeats, seed=seed, n_jobs=n_jobs)))
    return out


def table_csv(rows):
    buf = io.StringIO()
    writer = csv.DictWriter(buf, fieldnames=list(rows[0].keys()) if rows else list(TABLE_COLUMNS), lineterminator="\n")
    writer.writeheader()
    writer.writerows(rows)
    return buf.getvalue()


def report_json(report):
    return json.dumps(report.to_json() if isinstance(report, EvalReport) else report, indent=1, sort_keys=True) + "\n"
