from __future__ import annotations

import copy
from dataclasses import dataclass, field
from math import prod, sqrt

import numpy as np

from ..errors import NonFiniteError, ShapeError
from .layers import Layer, LayerSpec, make_layer, output_shape

INIT_MODES = ("scaled", "unit")


@dataclass
class ForwardCache:
    network_id: int
    version: int
    train: bool
    batch: int
    entries: list = field(default_factory=list)


class Network:
    """An ordered stack of layers mapping flattened rows to flattened rows.

    Parameters live on the layers; ``parameters()`` yields them in a fixed
    order that ``backward`` and the optimiser share.
    """

    def __init__(self, layers: list[Layer], input_shape: tuple):
        self.layers = layers
        self.input_shape = tuple(input_shape)
        self.output_shape = layers[-1].out_shape if layers else self.input_shape
        # bumped on every parameter update so stale caches are detectable
        self.version = 0

    @property
    def specs(self) -> list[LayerSpec]:
        return [layer.spec for layer in self.layers]

    @property
    def input_dim(self) -> int:
        return prod(self.input_shape)

    @property
    def output_dim(self) -> int:
        return prod(self.output_shape)

    def is_autoencoder(self) -> bool:
        return self.output_shape == self.input_shape

    def parameters(self) -> list[tuple[int, str, np.ndarray]]:
        return [(i, name, arr) for i, layer in enumerate(self.layers) for name, arr in layer.params.items()]

    def param_arrays(self) -> list[np.ndarray]:
        return [arr for _, _, arr in self.parameters()]

    def weight_arrays(self) -> list[np.ndarray]:
        """Dense and conv weight tensors: the arrays the weight penalty covers."""
        return [layer.params[n] for layer in self.layers for n in layer.weight_names]

    def weight_mask(self) -> list[bool]:
        return [name in layer.weight_names for layer in self.layers for name in layer.params]

    def weight_penalty(self) -> float:
        return float(sum(np.sum(w * w) for w in self.weight_arrays()))

    def copy(self) -> "Network":
        return copy.deepcopy(self)

    def forward(self, x, mode: str = "infer"):
        """Run ``x`` (batch x input_dim) through the network.

        Returns the flattened output and a cache for ``backward``.  In
        ``infer`` mode batch normalisation uses its running statistics.
        """
        if mode not in ("train", "infer"):
            raise ValueError(f"mode must be 'train' or 'infer', got {mode!r}")
        x = np.asarray(x, dtype=np.float64)
        if x.ndim != 2 or x.shape[1] != self.input_dim:
            raise ShapeError(f"network expects (batch, {self.input_dim}) input, got {x.shape}")
        train = mode == "train"
        cache = ForwardCache(id(self), self.version, train, x.shape[0])
        a = x.reshape((x.shape[0],) + self.input_shape)
        for layer in self.layers:
            a, c = layer.forward(a, train)
            cache.entries.append(c)
        out = a.reshape(x.shape[0], -1)
        if not np.all(np.isfinite(out)):
            raise NonFiniteError("network forward produced non-finite output")
        return out, cache

    def predict(self, x) -> np.ndarray:
        return self.forward(x, "infer")[0]

    def backward(self, cache: ForwardCache, grad_output) -> list[np.ndarray]:
        """Gradients of a loss w.r.t. every parameter, given dLoss/dOutput.

        Also stores dLoss/dInput on ``self.last_input_grad``.
        """
        if not isinstance(cache, ForwardCache) or cache.network_id != id(self):
            raise ValueError("cache does not belong to this network")
        if cache.version != self.version:
            raise ValueError("stale cache: parameters changed since the forward pass")
        if not cache.train:
            raise ValueError("backward needs a cache from a train-mode forward pass")
        g = np.asarray(grad_output, dtype=np.float64)
        if g.shape != (cache.batch, self.output_dim):
            raise ShapeError(f"grad_output shape {g.shape} != {(cache.batch, self.output_dim)}")
        g = g.reshape((cache.batch,) + self.output_shape)
        per_layer = []
        for layer, c in zip(reversed(self.layers), reversed(cache.entries)):
            g, grads = layer.backward(c, g)
            per_layer.append(grads)
        per_layer.reverse()
        self.last_input_grad = g.reshape(cache.batch, -1)
        return [per_layer[i][name] for i, name, _ in self.parameters()]

    def mark_updated(self):
        self.version += 1
        for arr in self.param_arrays():
            if not np.all(np.isfinite(arr)):
                raise NonFiniteError("non-finite parameter after update")


def build_network(specs, rng: np.random.Generator | None = None, init_scale: float = 1.0,
                  input_shape: tuple | None = None, init: str = "scaled") -> Network:
    """Validate the shape chain of ``specs`` and initialise parameters.

    Weights are drawn uniformly from ``[-init_scale * s, init_scale * s]``
    with ``s = 1/sqrt(fan_in)`` (``init="scaled"``) or ``s = 1``
    (``init="unit"``).  Biases start at zero, batchnorm at scale 1, shift 0.
    """
    specs = list(specs)
    if not specs:
        raise ShapeError("a network needs at least one layer")
    if not init_scale > 0:
        raise ValueError("init_scale must be positive")
    if init not in INIT_MODES:
        raise ValueError(f"init must be one of {INIT_MODES}")
    if rng is None:
        rng = np.random.default_rng(0)
    if input_shape is None:
        first = specs[0]
        if first.kind != "dense":
            raise ShapeError("input_shape is required when the first layer is not dense")
        input_shape = (first.in_dim,)
    shape = tuple(input_shape)
    layers = []
    for i, spec in enumerate(specs):
        try:
            out = output_shape(spec, shape)
        except ShapeError as exc:
            prev = specs[i - 1].describe() if i else f"input{shape}"
            raise ShapeError(f"layer {i} {spec.describe()} does not accept the output of {prev}: {exc}") from None
        layer = make_layer(spec, shape)
        if hasattr(layer, "init"):
            if spec.kind == "dense":
                fan_in = spec.in_dim
            elif spec.kind == "conv2d":
                fan_in = spec.in_channels * spec.filter_size ** 2
            else:
                fan_in = 1
            s = 1.0 / sqrt(fan_in) if init == "scaled" else 1.0
            layer.init(rng, init_scale * s)
        layers.append(layer)
        shape = out
    return Network(layers, input_shape)


def mse_loss(x_hat, target):
    """Squared Frobenius error and its gradient with respect to ``x_hat``."""
    x_hat = np.asarray(x_hat, dtype=np.float64)
    target = np.asarray(target, dtype=np.float64)
    if x_hat.shape != target.shape:
        raise ShapeError(f"prediction shape {x_hat.shape} != target shape {target.shape}")
    diff = x_hat - target
    return float(np.sum(diff * diff)), 2.0 * diff
