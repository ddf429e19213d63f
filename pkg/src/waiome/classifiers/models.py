"""Model specs, fitted models for every family and the JSON model file."""
from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .. import seeding
from ..grid import N_FREQ, N_POINTS, N_PRESSURE, ParseError
from .features import Standardizer, flatten
from .forest import Forest, Tree, rf_train
from .knn import knn_predict
from .networks import ARCHITECTURES, TrainingConfig, build_network, train_network
from .svm import KERNELS, SVMModel, margin_to_probability, svm_predict, svm_train

FORMAT_VERSION = 1
FAMILIES = ("knn", "svm", "rf", "fnn", "cnn")
KNN_KS = (1, 3, 15)
TREE_RANGE = (10, 500)
FNN_ARCHS = ("fnn1", "fnn2")
CNN_ARCHS = ("cnn1", "cnn2", "cnn2s")
STOCHASTIC = ("rf", "fnn", "cnn")


@dataclass(frozen=True)
class ModelSpec:
    family: str
    k: int | None = None
    kernel: str | None = None
    n_trees: int | None = None
    arch: str | None = None

    def __post_init__(self):
        fam = self.family.lower()
        object.__setattr__(self, "family", fam)
        if fam == "knn":
            if self.k not in KNN_KS:
                raise ValueError(f"KNN k must be one of {KNN_KS}, got {self.k}")
        elif fam == "svm":
            if self.kernel not in KERNELS:
                raise ValueError(f"SVM kernel must be one of {KERNELS}, got {self.kernel!r}")
        elif fam == "rf":
            if self.n_trees is None or not TREE_RANGE[0] <= self.n_trees <= TREE_RANGE[1]:
                raise ValueError(f"RF n_trees must lie in {TREE_RANGE}, got {self.n_trees}")
        elif fam in ("fnn", "cnn"):
            allowed = FNN_ARCHS if fam == "fnn" else CNN_ARCHS
            arch = (self.arch or "").lower()
            if arch not in allowed:
                raise ValueError(f"{fam.upper()} arch must be one of {allowed}, got {self.arch!r}")
            object.__setattr__(self, "arch", arch)
        else:
            raise ValueError(f"unknown model family {self.family!r}; choose from {FAMILIES}")

    @classmethod
    def parse(cls, name, k=None, kernel=None, n_trees=None):
        """``knn``/``svm``/``rf`` take their hyperparameter separately; network
        families are named by architecture (``fnn1``, ``cnn2``...)."""
        name = name.lower()
        if name in ARCHITECTURES:
            return cls("fnn" if name.startswith("fnn") else "cnn", arch=name)
        return cls(name, k=k, kernel=kernel, n_trees=n_trees)

    @property
    def stochastic(self):
        return self.family in STOCHASTIC

    @property
    def classifier(self):
        return self.family.upper()

    @property
    def design(self):
        if self.family == "knn":
            return str(self.k)
        if self.family == "svm":
            return {"poly3": "Poly", "rbf": "RBF", "linear": "Linear", "sigmoid": "Sigmoid"}[self.kernel]
        if self.family == "rf":
            return str(self.n_trees)
        return self.arch.upper()

    @property
    def is_image(self):
        return self.family == "cnn"

    def to_json(self):
        return {k: v for k, v in self.__dict__.items() if v is not None}

    @classmethod
    def from_json(cls, doc):
        return cls(**doc)


def _features(images):
    X = np.asarray(images, dtype=np.float64)
    if X.ndim == 2 and X.shape[1] == N_POINTS:
        return X
    return flatten(X)


@dataclass
class TrainedModel:
    spec: ModelSpec
    standardizer: Standardizer
    model: object  # family payload
    seed: int = 0
    training: TrainingConfig | None = None
    history: list = field(default_factory=list)

    def _inputs(self, images):
        Z = self.standardizer.apply(_features(images))
        if self.spec.is_image:
            return Z.reshape(-1, 1, N_FREQ, N_PRESSURE)
        return Z

    def predict(self, images):
        """(labels, OME probabilities) for a batch of images or feature rows."""
        Z = self._inputs(images)
        fam = self.spec.family
        if fam == "knn":
            X, y = self.model
            labels, score = knn_predict(X, y, self.spec.k, Z)
            return np.asarray(labels, dtype=np.int8), np.asarray(score, dtype=np.float64)
        if fam == "svm":
            labels, margin = svm_predict(self.model, Z)
            return labels, margin_to_probability(margin)
        p = self.model.predict_proba(Z)  # forest vote fraction or network sigmoid
        return (p >= 0.5).astype(np.int8), p

    def predict_proba(self, images):
        return self.predict(images)[1]

    def scores(self, images):
        """Ranking scores for AUC (the raw margin for SVMs)."""
        if self.spec.family == "svm":
            return self.model.decision_function(self._inputs(images))
        return self.predict_proba(images)

    # --------------------------------------------------------- serialisation

    def arrays(self):
        """(params, batchnorm_stats, scalars) as plain dicts of arrays/values."""
        fam = self.spec.family
        params, stats, extra = {}, {}, {}
        if fam == "knn":
            params = {"X": self.model[0], "y": self.model[1]}
        elif fam == "svm":
            m = self.model
            params = {"support_vectors": m.support_vectors, "dual_coef": m.dual_coef}
            extra = {"rho": m.rho, "gamma": m.gamma, "C": m.C, "iterations": m.iterations}
        elif fam == "rf":
            for i, t in enumerate(self.model.trees):
                for k in ("feature", "threshold", "left", "right", "value", "importance"):
                    params[f"tree{i}.{k}"] = getattr(t, k)
            extra = {"n_trees": len(self.model.trees), "n_features": self.model.n_features}
        else:
            params, stats = self.model.state()
        return params, stats, extra

    def to_json(self):
        params, stats, extra = self.arrays()
        return {
            "format_version": FORMAT_VERSION,
            "spec": self.spec.to_json(),
            "seed": int(self.seed),
            "training": None if self.training is None else self.training.to_json(),
            "standardizer": self.standardizer.to_json(),
            "params": {k: _encode(v) for k, v in params.items()},
            "batchnorm_stats": {k: _encode(v) for k, v in stats.items()},
            "extra": extra,
        }

    def __eq__(self, other):
        if not isinstance(other, TrainedModel):
            return NotImplemented
        if self.spec != other.spec or self.seed != other.seed:
            return False
        s1, s2 = self.standardizer, other.standardizer
        if not (np.array_equal(s1.mean, s2.mean) and np.array_equal(s1.std, s2.std)):
            return False
        a, b = self.arrays(), other.arrays()
        for d1, d2 in zip(a[:2], b[:2]):
            if d1.keys() != d2.keys() or not all(np.array_equal(d1[k], d2[k]) for k in d1):
                return False
        return a[2] == b[2]

    __hash__ = None


def _encode(a):
    a = np.asarray(a)
    return {"shape": list(a.shape), "dtype": a.dtype.name, "data": a.ravel().tolist()}


def _decode(doc):
    return np.asarray(doc["data"], dtype=doc["dtype"]).reshape(doc["shape"])


def fit_model(spec, images, labels, seed=0, training=None, n_jobs=1, log=None):
    """Fit the standardizer on the training images, then the model."""
    X = _features(images)
    y = np.asarray(labels, dtype=np.int8)
    std = Standardizer.fit(X)
    Z = std.apply(X)
    fam = spec.family
    history = []
    if fam == "knn":
        if Z.shape[0] < spec.k:
            raise ValueError(f"k={spec.k} exceeds training size {Z.shape[0]}")
        payload = (Z, y.copy())
    elif fam == "svm":
        payload = svm_train(Z, y, kernel=spec.kernel)
    elif fam == "rf":
        payload = rf_train(Z, y, n_trees=spec.n_trees, seed=seed, n_jobs=n_jobs)
    else:
        cfg = training or TrainingConfig()
        net = build_network(spec.arch, seed=seeding.child_seed(seed, "nn.init"))
        if spec.is_image:
            Z = Z.reshape(-1, 1, N_FREQ, N_PRESSURE)
        cfg = TrainingConfig(**{**cfg.to_json(), "seed": seeding.child_seed(seed, "nn.train")})
        history = train_network(net, Z, y, cfg, log=log)
        payload = net
        training = cfg
    return TrainedModel(spec, std, payload, seed=int(seed), training=training, history=history)


def model_from_json(doc):
    if doc.get("format_version") != FORMAT_VERSION:
        raise ParseError(f"unsupported model format_version {doc.get('format_version')!r}")
    spec = ModelSpec.from_json(doc["spec"])
    std = Standardizer.from_json(doc["standardizer"])
    params = {k: _decode(v) for k, v in doc["params"].items()}
    stats = {k: _decode(v) for k, v in doc.get("batchnorm_stats", {}).items()}
    extra = doc.get("extra", {})
    training = TrainingConfig(**doc["training"]) if doc.get("training") else None
    fam = spec.family
    if fam == "knn":
        payload = (params["X"], params["y"])
    elif fam == "svm":
        payload = SVMModel(spec.kernel, float(extra["gamma"]), float(extra["C"]), params["support_vectors"],
                           params["dual_coef"], float(extra["rho"]), int(extra.get("iterations", 0)))
    elif fam == "rf":
        trees = [
            Tree(*(params[f"tree{i}.{k}"] for k in ("feature", "threshold", "left", "right", "value", "importance")))
            for i in range(int(extra["n_trees"]))
        ]
        payload = Forest(trees, int(extra["n_features"]))
    else:
        payload = build_network(spec.arch)
        payload.load_state(params, stats)
    return TrainedModel(spec, std, payload, seed=int(doc.get("seed", 0)), training=training)


def save_model(model, path):
    Path(path).write_text(json.dumps(model.to_json(), separators=(",", ":")) + "\n")
    return Path(path)


def load_model(path):
    path = Path(path)
    try:
        doc = json.loads(path.read_text())
    except json.JSONDecodeError as e:
        raise ParseError(f"invalid JSON: {e.msg}", path, e.lineno) from None
    return model_from_json(doc)
