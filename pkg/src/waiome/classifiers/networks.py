"""FNN/CNN builders, the class-weighted BCE loss and an Adam training loop."""
from __future__ import annotations

from dataclasses import asdict, dataclass

import numpy as np

from ..grid import N_FREQ, N_POINTS, N_PRESSURE
from .layers import BatchNorm, Conv2D, Dense, Dropout, Flatten, MaxPool2D, ReLU


class TrainingError(RuntimeError):
    def __init__(self, message, epoch=None, batch=None, layer=None):
        self.epoch, self.batch, self.layer = epoch, batch, layer
        super().__init__(f"{message} (epoch={epoch}, batch={batch}, layer={layer})")


# Layer recipes. Hidden dense/conv layers are followed by their activation;
# the network ends in Dense(1) producing a logit (sigmoid applied in predict).
ARCHITECTURES = {
    "fnn1": [
        ("dense", 1000), ("relu",), ("dropout", 0.2),
        ("dense", 100), ("relu",), ("dropout", 0.2),
        ("dense", 1),
    ],
    "fnn2": [
        ("dense", 1000), ("relu",), ("dropout", 0.2),
        ("dense", 500), ("relu",), ("dropout", 0.2),
        ("dense", 100), ("relu",), ("dropout", 0.2),
        ("dense", 1),
    ],
    "cnn1": [
        ("conv", 20, (21, 11)), ("pool", (3, 2)), ("bn",), ("relu",), ("dropout", 0.2),
        ("flatten",),
        ("dense", 100), ("relu",), ("dropout", 0.2),
        ("dense", 1),
    ],
    "cnn2": [
        ("conv", 20, (21, 11)), ("pool", (3, 2)), ("bn",), ("relu",), ("dropout", 0.2),
        ("conv", 40, (11, 7)), ("bn",), ("relu",), ("dropout", 0.2),
        ("conv", 60, (3, 3)), ("bn",), ("relu",), ("dropout", 0.2),
        ("flatten",),
        ("dense", 100), ("relu",), ("dropout", 0.25),
        ("dense", 1),
    ],
    # reduced CNN2 layout for weight sweeps on one CPU
    "cnn2s": [
        ("conv", 4, (7, 5)), ("pool", (3, 2)), ("bn",), ("relu",), ("dropout", 0.2),
        ("conv", 8, (5, 3)), ("bn",), ("relu",), ("dropout", 0.2),
        ("flatten",),
        ("dense", 16), ("relu",), ("dropout", 0.25),
        ("dense", 1),
    ],
}

IMAGE_SHAPE = (1, N_FREQ, N_PRESSURE)


def input_shape_for(arch):
    return IMAGE_SHAPE if ARCHITECTURES[arch][0][0] == "conv" else (N_POINTS,)


class Network:
    def __init__(self, layers, input_shape, arch="custom", dtype=np.float32):
        self.layers = layers
        self.input_shape = tuple(input_shape)
        self.arch = arch
        self.dtype = np.dtype(dtype)
        if self.layers and isinstance(self.layers[0], Conv2D):
            self.layers[0].input_grad = False

    @property
    def is_image(self):
        return len(self.input_shape) == 3

    def forward(self, x, train=False):
        for layer in self.layers:
            x = layer.forward(x, train=train)
        return x.reshape(-1)

    def backward(self, dlogits):
        d = dlogits.reshape(-1, 1).astype(self.dtype, copy=False)
        for layer in reversed(self.layers):
            d = layer.backward(d)
        return d

    def named_params(self):
        for i, layer in enumerate(self.layers):
            for k, v in layer.params.items():
                yield f"{i}.{k}", layer, k, v

    def named_buffers(self):
        for i, layer in enumerate(self.layers):
            for k, v in layer.buffers.items():
                yield f"{i}.{k}", layer, k, v

    def predict_logits(self, X, batch_size=256):
        X = np.asarray(X, dtype=self.dtype)
        out = [self.forward(X[i : i + batch_size], train=False) for i in range(0, X.shape[0], batch_size)]
        return np.concatenate(out) if out else np.zeros(0, dtype=self.dtype)

    def predict_proba(self, X):
        return sigmoid(self.predict_logits(X).astype(np.float64))

    def summary(self):
        return [layer.describe() for layer in self.layers]

    def state(self):
        return (
            {name: v for name, _, _, v in self.named_params()},
            {name: v for name, _, _, v in self.named_buffers()},
        )

    def load_state(self, params, buffers):
        for name, layer, k, v in self.named_params():
            layer.params[k] = np.asarray(params[name], dtype=self.dtype).reshape(v.shape)
        for name, layer, k, v in self.named_buffers():
            layer.buffers[k] = np.asarray(buffers[name], dtype=self.dtype).reshape(v.shape)


def parameter_count(net):
    """Weights + biases + batch-norm gamma/beta/running mean/running var."""
    return int(sum(v.size for *_, v in net.named_params()) + sum(v.size for *_, v in net.named_buffers()))


def build_from_config(config, input_shape, seed=0, dtype=np.float32, arch="custom"):
    rng = np.random.default_rng(seed)
    shape = tuple(input_shape)
    layers = []
    for spec in config:
        kind = spec[0]
        if kind == "dense":
            layer = Dense(int(np.prod(shape)), spec[1], rng, dtype)
        elif kind == "conv":
            layer = Conv2D(shape[0], spec[1], spec[2], rng, dtype)
        elif kind == "pool":
            layer = MaxPool2D(spec[1])
        elif kind == "bn":
            layer = BatchNorm(shape[0], dtype=dtype)
        elif kind == "relu":
            layer = ReLU()
        elif kind == "dropout":
            layer = Dropout(spec[1], rng)
        elif kind == "flatten":
            layer = Flatten()
        else:
            raise ValueError(f"unknown layer kind {kind!r}")
        shape = layer.output_shape(shape)
        layers.append(layer)
    return Network(layers, input_shape, arch=arch, dtype=dtype)


def build_network(arch, seed=0, dtype=np.float32):
    arch = str(arch).lower()
    if arch not in ARCHITECTURES:
        raise ValueError(f"unknown architecture {arch!r}; choose from {sorted(ARCHITECTURES)}")
    return build_from_config(ARCHITECTURES[arch], input_shape_for(arch), seed=seed, dtype=dtype, arch=arch)


def sigmoid(z):
    return 0.5 * (1.0 + np.tanh(0.5 * z))


def weighted_bce(logits, y, ome_weight=1.0):
    """Mean of ``-(w*y*log p + (1-y)*log(1-p))`` and its gradient w.r.t. the logits."""
    z = np.asarray(logits, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    with np.errstate(invalid="ignore"):  # NaN logits are reported by the caller
        pos = ome_weight * y * np.logaddexp(0.0, -z)
        neg = (1.0 - y) * np.logaddexp(0.0, z)
        p = sigmoid(z)
    grad = (ome_weight * y * (p - 1.0) + (1.0 - y) * p) / z.size
    return float(np.mean(pos + neg)), grad


@dataclass(frozen=True)
class TrainingConfig:
    seed: int = 0
    epochs: int = 30
    batch_size: int = 32
    learning_rate: float = 1e-3
    adam_beta1: float = 0.9
    adam_beta2: float = 0.999
    adam_eps: float = 1e-8
    ome_class_weight: float = 1.0

    def __post_init__(self):
        if self.epochs < 1 or self.batch_size < 1:
            raise ValueError("epochs and batch_size must be positive")
        if self.learning_rate <= 0 or self.adam_eps <= 0:
            raise ValueError("learning rate and eps must be positive")
        if not (0 < self.adam_beta1 < 1 and 0 < self.adam_beta2 < 1):
            raise ValueError("Adam betas must lie in (0, 1)")
        if self.ome_class_weight < 1.0:
            raise ValueError("ome_class_weight must be >= 1")

    def to_json(self):
        return asdict(self)


class Adam:
    def __init__(self, net, cfg):
        self.cfg = cfg
        self.t = 0
        self.m = {name: np.zeros_like(v) for name, *_, v in net.named_params()}
        self.v = {name: np.zeros_like(v) for name, *_, v in net.named_params()}
        self._tmp = {name: np.zeros_like(v) for name, *_, v in net.named_params()}

    def step(self, net):
        c = self.cfg
        self.t += 1
        b1, b2 = c.adam_beta1, c.adam_beta2
        lr_t = c.learning_rate * np.sqrt(1 - b2**self.t) / (1 - b1**self.t)
        eps_t = c.adam_eps * np.sqrt(1 - b2**self.t)
        for name, layer, k, p in net.named_params():
            g = layer.grads[k]
            m, v, tmp = self.m[name], self.v[name], self._tmp[name]
            # m = b1*m + (1-b1)*g ; v = b2*v + (1-b2)*g^2 ; p -= lr_t*m/(sqrt(v)+eps_t)
            np.multiply(g, 1 - b1, out=tmp)
            m *= b1
            m += tmp
            np.multiply(g, g, out=tmp)
            tmp *= 1 - b2
            v *= b2
            v += tmp
            np.sqrt(v, out=tmp)
            tmp += eps_t
            np.divide(m, tmp, out=tmp)
            tmp *= lr_t
            p -= tmp


def _first_bad_layer(net, xb):
    x = xb
    for i, layer in enumerate(net.layers):
        for k, v in layer.params.items():
            if not np.all(np.isfinite(v)):
                return f"{i}:{layer.describe()}.{k}"
        x = layer.forward(x, train=False)
        if not np.all(np.isfinite(x)):
            return f"{i}:{layer.describe()}"
    return None


def train_network(net, X, y, cfg, log=None):
    """Minimise class-weighted BCE with Adam for a fixed number of epochs.

    ``X`` must already be standardised, shaped (n, 5457) for dense nets or
    (n, 1, 107, 51) for convolutional ones. Returns the per-epoch mean loss.
    """
    X = np.asarray(X, dtype=net.dtype)
    y = np.asarray(y, dtype=np.float64)
    if X.shape[1:] != net.input_shape:
        raise ValueError(f"input shape {X.shape[1:]} does not match network input {net.input_shape}")
    rng = np.random.default_rng(cfg.seed)
    for layer in net.layers:
        if isinstance(layer, Dropout):
            layer.rng = rng
    opt = Adam(net, cfg)
    n = X.shape[0]
    history = []
    for epoch in range(cfg.epochs):
        perm = rng.permutation(n)
        total = 0.0
        for b, start in enumerate(range(0, n, cfg.batch_size)):
            idx = perm[start : start + cfg.batch_size]
            logits = net.forward(X[idx], train=True)
            loss, grad = weighted_bce(logits, y[idx], cfg.ome_class_weight)
            if not np.isfinite(loss):
                raise TrainingError("non-finite loss", epoch, b, _first_bad_layer(net, X[idx]))
            net.backward(grad)
            opt.step(net)
            total += loss * idx.size
        history.append(total / n)
        if log is not None:
            log(f"epoch {epoch + 1}/{cfg.epochs} loss {history[-1]:.4f}")
    return history
