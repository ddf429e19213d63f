"""Neural-network layers with explicit forward/backward passes.

Tensors are NCHW for the convolutional path (H = frequency, W = pressure)
and (N, D) for dense layers. Every layer caches what its backward pass
needs during ``forward(x, train=True)``.
"""
from __future__ import annotations

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view


class Layer:
    name = "layer"

    def __init__(self):
        self.params = {}
        self.grads = {}
        self.buffers = {}  # non-trained state (batch-norm running stats)

    def forward(self, x, train=False):
        raise NotImplementedError

    def backward(self, dout):
        raise NotImplementedError

    def output_shape(self, in_shape):
        return in_shape

    def describe(self):
        return type(self).__name__


def _uniform_fan_in(rng, shape, fan_in, dtype):
    limit = np.sqrt(6.0 / fan_in)
    return rng.uniform(-limit, limit, size=shape).astype(dtype)


class Dense(Layer):
    def __init__(self, n_in, n_out, rng, dtype=np.float32):
        super().__init__()
        self.n_in, self.n_out = n_in, n_out
        self.params["W"] = _uniform_fan_in(rng, (n_in, n_out), n_in, dtype)
        self.params["b"] = np.zeros(n_out, dtype=dtype)

    def forward(self, x, train=False):
        self._x = x
        return x @ self.params["W"] + self.params["b"]

    def backward(self, dout):
        self.grads["W"] = self._x.T @ dout
        self.grads["b"] = dout.sum(axis=0)
        return dout @ self.params["W"].T

    def output_shape(self, in_shape):
        return (self.n_out,)

    def describe(self):
        return f"Dense({self.n_out})"


class Conv2D(Layer):
    """Stride-1 convolution with 'same' padding (extra pad after, as Keras)."""

    def __init__(self, c_in, filters, kernel, rng, dtype=np.float32):
        super().__init__()
        kh, kw = kernel
        self.c_in, self.filters, self.kernel = c_in, filters, (kh, kw)
        fan_in = c_in * kh * kw
        self.params["W"] = _uniform_fan_in(rng, (filters, c_in, kh, kw), fan_in, dtype)
        self.params["b"] = np.zeros(filters, dtype=dtype)
        self.input_grad = True

    def _pad(self):
        kh, kw = self.kernel
        return ((kh - 1) // 2, kh - 1 - (kh - 1) // 2), ((kw - 1) // 2, kw - 1 - (kw - 1) // 2)

    def forward(self, x, train=False):
        n, c, h, w = x.shape
        kh, kw = self.kernel
        ph, pw = self._pad()
        xp = np.pad(x, ((0, 0), (0, 0), ph, pw))
        win = sliding_window_view(xp, (kh, kw), axis=(2, 3))  # n, c, h, w, kh, kw
        cols = np.ascontiguousarray(win.transpose(0, 2, 3, 1, 4, 5)).reshape(n * h * w, c * kh * kw)
        wmat = self.params["W"].reshape(self.filters, -1)
        out = cols @ wmat.T + self.params["b"]
        if train:
            self._cols = cols
            self._xshape = x.shape
        return out.reshape(n, h, w, self.filters).transpose(0, 3, 1, 2)

    def backward(self, dout):
        n, c, h, w = self._xshape
        kh, kw = self.kernel
        dmat = dout.transpose(0, 2, 3, 1).reshape(n * h * w, self.filters)
        self.grads["W"] = (dmat.T @ self._cols).reshape(self.params["W"].shape)
        self.grads["b"] = dmat.sum(axis=0)
        self._cols = None
        if not self.input_grad:
            return None
        dcols = (dmat @ self.params["W"].reshape(self.filters, -1)).reshape(n, h, w, c, kh, kw)
        ph, pw = self._pad()
        dxp = np.zeros((n, c, h + kh - 1, w + kw - 1), dtype=dout.dtype)
        for i in range(kh):
            for j in range(kw):
                dxp[:, :, i : i + h, j : j + w] += dcols[:, :, :, :, i, j].transpose(0, 3, 1, 2)
        return dxp[:, :, ph[0] : ph[0] + h, pw[0] : pw[0] + w]

    def output_shape(self, in_shape):
        return (self.filters,) + tuple(in_shape[1:])

    def describe(self):
        return f"Conv2D({self.filters}, {self.kernel})"


class MaxPool2D(Layer):
    """Non-overlapping max pooling, stride = pool size, trailing rows/cols
    that do not fill a window are dropped."""

    def __init__(self, pool):
        super().__init__()
        self.pool = tuple(pool)

    def forward(self, x, train=False):
        n, c, h, w = x.shape
        ph, pw = self.pool
        ho, wo = h // ph, w // pw
        xc = x[:, :, : ho * ph, : wo * pw]
        win = xc.reshape(n, c, ho, ph, wo, pw).transpose(0, 1, 2, 4, 3, 5).reshape(n, c, ho, wo, ph * pw)
        arg = win.argmax(axis=-1)
        if train:
            self._arg = arg
            self._xshape = x.shape
        return np.take_along_axis(win, arg[..., None], axis=-1)[..., 0]

    def backward(self, dout):
        n, c, h, w = self._xshape
        ph, pw = self.pool
        ho, wo = h // ph, w // pw
        dwin = np.zeros((n, c, ho, wo, ph * pw), dtype=dout.dtype)
        np.put_along_axis(dwin, self._arg[..., None], dout[..., None], axis=-1)
        dx = np.zeros(self._xshape, dtype=dout.dtype)
        dx[:, :, : ho * ph, : wo * pw] = dwin.reshape(n, c, ho, wo, ph, pw).transpose(0, 1, 2, 4, 3, 5).reshape(n, c, ho * ph, wo * pw)
        return dx

    def output_shape(self, in_shape):
        c, h, w = in_shape
        return (c, h // self.pool[0], w // self.pool[1])

    def describe(self):
        return f"MaxPooling2D{self.pool}"


class BatchNorm(Layer):
    """Per-channel (axis 1) batch normalisation for (N, C) or (N, C, H, W).

    Training uses batch statistics and updates running averages with
    ``running = momentum * running + (1 - momentum) * batch``.
    """

    def __init__(self, channels, momentum=0.9, eps=1e-5, dtype=np.float32):
        super().__init__()
        self.channels, self.momentum, self.eps = channels, momentum, eps
        self.params["gamma"] = np.ones(channels, dtype=dtype)
        self.params["beta"] = np.zeros(channels, dtype=dtype)
        self.buffers["running_mean"] = np.zeros(channels, dtype=dtype)
        self.buffers["running_var"] = np.ones(channels, dtype=dtype)

    def _axes(self, x):
        return (0,) + tuple(range(2, x.ndim))

    def _bshape(self, x):
        return (1, -1) + (1,) * (x.ndim - 2)

    def forward(self, x, train=False):
        axes, bs = self._axes(x), self._bshape(x)
        if train:
            mu = x.mean(axis=axes)
            var = x.var(axis=axes)
            m = self.momentum
            self.buffers["running_mean"] = (m * self.buffers["running_mean"] + (1 - m) * mu).astype(x.dtype)
            self.buffers["running_var"] = (m * self.buffers["running_var"] + (1 - m) * var).astype(x.dtype)
        else:
            mu, var = self.buffers["running_mean"], self.buffers["running_var"]
        inv = 1.0 / np.sqrt(var + self.eps)
        xhat = (x - mu.reshape(bs)) * inv.reshape(bs)
        if train:
            self._xhat, self._inv = xhat, inv
        return self.params["gamma"].reshape(bs) * xhat + self.params["beta"].reshape(bs)

    def backward(self, dout):
        axes, bs = self._axes(dout), self._bshape(dout)
        xhat, inv = self._xhat, self._inv
        m = dout.size / dout.shape[1]
        self.grads["gamma"] = (dout * xhat).sum(axis=axes)
        self.grads["beta"] = dout.sum(axis=axes)
        dxhat = dout * self.params["gamma"].reshape(bs)
        dx = (inv.reshape(bs) / m) * (
            m * dxhat - dxhat.sum(axis=axes).reshape(bs) - xhat * (dxhat * xhat).sum(axis=axes).reshape(bs)
        )
        self._xhat = None
        return dx

    def describe(self):
        return "BatchNormalization"


class ReLU(Layer):
    def forward(self, x, train=False):
        if train:
            self._mask = x > 0
        return np.maximum(x, 0)

    def backward(self, dout):
        return dout * self._mask

    def describe(self):
        return "Activation('relu')"


class Dropout(Layer):
    """Inverted dropout: kept units are scaled by 1/(1-rate) at train time."""

    def __init__(self, rate, rng):
        super().__init__()
        self.rate = float(rate)
        self.rng = rng

    def forward(self, x, train=False):
        if not train or self.rate == 0.0:
            self._mask = None
            return x
        keep = 1.0 - self.rate
        self._mask = (self.rng.random(x.shape) < keep).astype(x.dtype) / keep
        return x * self._mask

    def backward(self, dout):
        return dout if self._mask is None else dout * self._mask

    def describe(self):
        return f"Dropout({self.rate:g})"


class Flatten(Layer):
    def forward(self, x, train=False):
        self._shape = x.shape
        return x.reshape(x.shape[0], -1)

    def backward(self, dout):
        return dout.reshape(self._shape)

    def output_shape(self, in_shape):
        return (int(np.prod(in_shape)),)

    def describe(self):
        return "Flatten"
