"""Layer specifications and their forward/backward kernels.

Activations travel between layers as arrays of shape ``(batch, *shape)`` where
``shape`` is ``(features,)`` for dense data or ``(channels, height, width)``
for images.
"""

from __future__ import annotations

from dataclasses import dataclass
from math import prod

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view

from ..errors import ShapeError

KINDS = ("dense", "conv2d", "batchnorm", "activation", "maxpool2d", "upsample2d")
ACTIVATIONS = ("linear", "sigmoid", "relu", "elu")

ELU_ALPHA = 1.0
BN_MOMENTUM = 0.9
BN_EPS = 1e-5


@dataclass(frozen=True)
class LayerSpec:
    kind: str
    in_dim: int = 0
    out_dim: int = 0
    in_channels: int = 0
    out_channels: int = 0
    filter_size: int = 0
    stride: int = 1
    padding: int | str = "same"
    activation: str = ""
    window: int = 0
    bias: bool = True

    def __post_init__(self):
        if self.kind not in KINDS:
            raise ValueError(f"unknown layer kind {self.kind!r}")
        if self.kind == "activation" and self.activation not in ACTIVATIONS:
            raise ValueError(f"unknown activation {self.activation!r}")

    def describe(self) -> str:
        if self.kind == "dense":
            return f"dense({self.in_dim}->{self.out_dim})"
        if self.kind == "conv2d":
            return (f"conv2d({self.in_channels}->{self.out_channels}, f={self.filter_size}, "
                    f"s={self.stride}, p={self.padding})")
        if self.kind == "activation":
            return self.activation
        if self.kind in ("maxpool2d", "upsample2d"):
            return f"{self.kind}({self.window})"
        return self.kind


def dense(in_dim: int, out_dim: int, bias: bool = True) -> LayerSpec:
    return LayerSpec("dense", in_dim=in_dim, out_dim=out_dim, bias=bias)


def conv2d(in_channels: int, out_channels: int, filter_size: int = 3, stride: int = 1,
           padding: int | str = "same", bias: bool = True) -> LayerSpec:
    return LayerSpec("conv2d", in_channels=in_channels, out_channels=out_channels,
                     filter_size=filter_size, stride=stride, padding=padding, bias=bias)


def batchnorm() -> LayerSpec:
    return LayerSpec("batchnorm")


def activation(name: str) -> LayerSpec:
    return LayerSpec("activation", activation=name)


def maxpool2d(window: int = 2) -> LayerSpec:
    return LayerSpec("maxpool2d", window=window)


def upsample2d(window: int = 2) -> LayerSpec:
    return LayerSpec("upsample2d", window=window)


def conv_padding(spec: LayerSpec) -> int:
    if spec.padding == "same":
        if spec.filter_size % 2 == 0:
            raise ShapeError(f"'same' padding needs an odd filter size, got {spec.filter_size}")
        return (spec.filter_size - 1) // 2
    return int(spec.padding)


def output_shape(spec: LayerSpec, shape: tuple) -> tuple:
    """Shape produced by ``spec`` given per-example input ``shape``; raises ShapeError."""
    k = spec.kind
    if k == "dense":
        if prod(shape) != spec.in_dim:
            raise ShapeError(f"{spec.describe()} expects {spec.in_dim} inputs, got shape {shape}")
        return (spec.out_dim,)
    if k in ("batchnorm", "activation"):
        return shape
    if len(shape) != 3:
        raise ShapeError(f"{spec.describe()} needs (channels, height, width) input, got {shape}")
    c, h, w = shape
    if k == "conv2d":
        if c != spec.in_channels:
            raise ShapeError(f"{spec.describe()} expects {spec.in_channels} channels, got {c}")
        p, f, s = conv_padding(spec), spec.filter_size, spec.stride
        ho, wo = (h + 2 * p - f) // s + 1, (w + 2 * p - f) // s + 1
        if ho < 1 or wo < 1:
            raise ShapeError(f"{spec.describe()} leaves no output on a {h}x{w} input")
        return (spec.out_channels, ho, wo)
    if k == "maxpool2d":
        if h % spec.window or w % spec.window:
            raise ShapeError(f"{spec.describe()} does not tile a {h}x{w} input")
        return (c, h // spec.window, w // spec.window)
    return (c, h * spec.window, w * spec.window)


class Layer:
    """A layer bound to concrete shapes and parameter arrays."""

    def __init__(self, spec: LayerSpec, in_shape: tuple):
        self.spec = spec
        self.in_shape = tuple(in_shape)
        self.out_shape = output_shape(spec, self.in_shape)
        self.params: dict[str, np.ndarray] = {}
        # non-trainable state (batchnorm running statistics)
        self.state: dict[str, np.ndarray] = {}

    # names of parameters counted by the weight regulariser
    weight_names: tuple = ()

    def forward(self, x, train):
        raise NotImplementedError

    def backward(self, cache, dy):
        raise NotImplementedError


class Dense(Layer):
    weight_names = ("W",)

    def init(self, rng, bound):
        s = self.spec
        self.params["W"] = rng.uniform(-bound, bound, size=(s.in_dim, s.out_dim))
        if s.bias:
            self.params["b"] = np.zeros(s.out_dim)

    def forward(self, x, train):
        x2 = x.reshape(x.shape[0], -1)
        y = x2 @ self.params["W"]
        if "b" in self.params:
            y = y + self.params["b"]
        return y, x2

    def backward(self, x2, dy):
        grads = {"W": x2.T @ dy}
        if "b" in self.params:
            grads["b"] = dy.sum(axis=0)
        dx = dy @ self.params["W"].T
        return dx.reshape((dy.shape[0],) + self.in_shape), grads


class Conv2D(Layer):
    weight_names = ("W",)

    def init(self, rng, bound):
        s = self.spec
        self.params["W"] = rng.uniform(-bound, bound,
                                       size=(s.out_channels, s.in_channels, s.filter_size, s.filter_size))
        if s.bias:
            self.params["b"] = np.zeros(s.out_channels)

    def _cols(self, x):
        p, f, st = conv_padding(self.spec), self.spec.filter_size, self.spec.stride
        xp = np.pad(x, ((0, 0), (0, 0), (p, p), (p, p))) if p else x
        win = sliding_window_view(xp, (f, f), axis=(2, 3))[:, :, ::st, ::st]
        # (B, C, Ho, Wo, f, f) -> (B, Ho, Wo, C, f, f)
        b, c, ho, wo = win.shape[:4]
        return win.transpose(0, 2, 3, 1, 4, 5).reshape(b * ho * wo, c * f * f), xp.shape

    def forward(self, x, train):
        cols, padded = self._cols(x)
        w = self.params["W"]
        b = x.shape[0]
        co, ho, wo = self.out_shape
        y = cols @ w.reshape(co, -1).T
        if "b" in self.params:
            y += self.params["b"]
        return y.reshape(b, ho, wo, co).transpose(0, 3, 1, 2), (cols, padded)

    def backward(self, cache, dy):
        cols, padded = cache
        w = self.params["W"]
        co, ci, f, _ = w.shape
        b, _, ho, wo = dy.shape
        st, p = self.spec.stride, conv_padding(self.spec)
        dyf = dy.transpose(0, 2, 3, 1).reshape(-1, co)
        grads = {"W": (dyf.T @ cols).reshape(w.shape)}
        if "b" in self.params:
            grads["b"] = dyf.sum(axis=0)
        h, wd = self.in_shape[1:]
        if st == 1 and f - 1 - p >= 0:
            # stride 1: dx is dy correlated with the flipped, channel-swapped kernel
            q = f - 1 - p
            dyp = np.pad(dy, ((0, 0), (0, 0), (q, q), (q, q))) if q else dy
            win = sliding_window_view(dyp, (f, f), axis=(2, 3))[:, :, :h, :wd]
            cols_dy = win.transpose(0, 2, 3, 1, 4, 5).reshape(b * h * wd, co * f * f)
            wflip = w[:, :, ::-1, ::-1].transpose(0, 2, 3, 1).reshape(co * f * f, ci)
            dx = (cols_dy @ wflip).reshape(b, h, wd, ci).transpose(0, 3, 1, 2)
            return np.ascontiguousarray(dx), grads
        dcols = (dyf @ w.reshape(co, -1)).reshape(b, ho, wo, ci, f, f)
        dxp = np.zeros(padded)
        for i in range(f):
            for j in range(f):
                dxp[:, :, i:i + st * ho:st, j:j + st * wo:st] += dcols[:, :, :, :, i, j].transpose(0, 3, 1, 2)
        return dxp[:, :, p:p + h, p:p + wd], grads


class BatchNorm(Layer):
    """Per-feature (dense) or per-channel (image) batch normalisation."""

    def init(self, rng, bound):
        c = self.in_shape[0]
        self.params["gamma"] = np.ones(c)
        self.params["beta"] = np.zeros(c)
        self.state["mean"] = np.zeros(c)
        self.state["var"] = np.ones(c)

    def _axes(self, x):
        return (0,) if x.ndim == 2 else (0, 2, 3)

    def _bcast(self, v, ndim):
        return v if ndim == 2 else v[None, :, None, None]

    def forward(self, x, train):
        axes = self._axes(x)
        if train:
            mean = x.mean(axis=axes)
            var = x.var(axis=axes)
            self.state["mean"] = BN_MOMENTUM * self.state["mean"] + (1 - BN_MOMENTUM) * mean
            self.state["var"] = BN_MOMENTUM * self.state["var"] + (1 - BN_MOMENTUM) * var
        else:
            mean, var = self.state["mean"], self.state["var"]
        inv = 1.0 / np.sqrt(var + BN_EPS)
        xhat = (x - self._bcast(mean, x.ndim)) * self._bcast(inv, x.ndim)
        y = xhat * self._bcast(self.params["gamma"], x.ndim) + self._bcast(self.params["beta"], x.ndim)
        return y, (xhat, inv)

    def backward(self, cache, dy):
        xhat, inv = cache
        axes = self._axes(dy)
        nd = dy.ndim
        m = dy.size // dy.shape[1]
        grads = {"gamma": (dy * xhat).sum(axis=axes), "beta": dy.sum(axis=axes)}
        dxhat = dy * self._bcast(self.params["gamma"], nd)
        dx = (self._bcast(inv, nd) / m) * (
            m * dxhat
            - self._bcast(dxhat.sum(axis=axes), nd)
            - xhat * self._bcast((dxhat * xhat).sum(axis=axes), nd))
        return dx, grads


def sigmoid(a):
    # split by sign to avoid overflow in exp
    out = np.empty_like(a)
    pos = a >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-a[pos]))
    e = np.exp(a[~pos])
    out[~pos] = e / (1.0 + e)
    return out


def relu(a):
    return np.maximum(a, 0.0)


def elu(a, alpha=ELU_ALPHA):
    return np.where(a >= 0, a, alpha * np.expm1(np.minimum(a, 0.0)))


class Activation(Layer):
    def forward(self, x, train):
        name = self.spec.activation
        if name == "linear":
            return x, None
        if name == "sigmoid":
            y = sigmoid(x)
            return y, y
        if name == "relu":
            return relu(x), x
        return elu(x), x

    def backward(self, cache, dy):
        name = self.spec.activation
        if name == "linear":
            return dy, {}
        if name == "sigmoid":
            return dy * cache * (1.0 - cache), {}
        if name == "relu":
            # derivative 0 at the kink
            return dy * (cache > 0), {}
        return dy * np.where(cache >= 0, 1.0, ELU_ALPHA * np.exp(np.minimum(cache, 0.0))), {}


class MaxPool2D(Layer):
    def forward(self, x, train):
        k = self.spec.window
        b, c, h, w = x.shape
        blocks = x.reshape(b, c, h // k, k, w // k, k).transpose(0, 1, 2, 4, 3, 5).reshape(b, c, h // k, w // k, k * k)
        # first maximal element wins ties
        idx = blocks.argmax(axis=-1)
        y = np.take_along_axis(blocks, idx[..., None], axis=-1)[..., 0]
        return y, idx

    def backward(self, idx, dy):
        k = self.spec.window
        b, c, ho, wo = dy.shape
        blocks = np.zeros((b, c, ho, wo, k * k))
        np.put_along_axis(blocks, idx[..., None], dy[..., None], axis=-1)
        dx = blocks.reshape(b, c, ho, wo, k, k).transpose(0, 1, 2, 4, 3, 5).reshape(b, c, ho * k, wo * k)
        return dx, {}


class Upsample2D(Layer):
    """Nearest-neighbour upsampling, the parameter-free mirror of max pooling."""

    def forward(self, x, train):
        k = self.spec.window
        return x.repeat(k, axis=2).repeat(k, axis=3), None

    def backward(self, cache, dy):
        k = self.spec.window
        b, c, h, w = dy.shape
        return dy.reshape(b, c, h // k, k, w // k, k).sum(axis=(3, 5)), {}


LAYER_TYPES = {
    "dense": Dense,
    "conv2d": Conv2D,
    "batchnorm": BatchNorm,
    "activation": Activation,
    "maxpool2d": MaxPool2D,
    "upsample2d": Upsample2D,
}


def make_layer(spec: LayerSpec, in_shape: tuple) -> Layer:
    return LAYER_TYPES[spec.kind](spec, in_shape)
