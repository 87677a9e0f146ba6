"""Robust autoencoder training.

The model explains a data matrix as ``X ~= Xhat(theta) + N`` and minimises

    ||X - Xhat(theta) - N||_F^2 + (mu/2) * Omega(theta) + lam * ||N||_1

by alternating two block updates: a few epochs of minibatch Adam on the
autoencoder fit to ``X - N`` (theta-step), then the exact minimiser over
``N`` at fixed theta, which is elementwise soft thresholding of the residual
at ``lam/2`` (N-step).  ``Omega`` is the sum of squared dense/conv weights.
``lam = inf`` disables the noise matrix and gives a plain (convolutional)
autoencoder.
"""

from __future__ import annotations

import csv
import io
import logging
import math
from dataclasses import dataclass, field

import numpy as np

from .errors import ConfigError, DivergenceError, NonFiniteError, ShapeError
from .linalg import NONZERO_TOL, as_matrix, soft_threshold
from .network import Adam, Network, build_network
from .network.persist import atomic_write_bytes

log = logging.getLogger(__name__)

TRACE_COLUMNS = ("alternation", "objective", "data_term", "l1_term", "omega_term", "nnz", "accepted")


@dataclass
class RobustConfig:
    lam: float = 0.2
    mu: float = 1e-3
    epochs_per_theta_step: int = 50
    max_alternations: int = 30
    objective_tol: float = 1e-4
    batch_size: int = 32
    learning_rate: float = 1e-3
    seed: int = 0
    init_scale: float = 1.0
    init: str = "scaled"

    def __post_init__(self):
        if not (self.lam >= 0):
            raise ConfigError(f"lambda must be >= 0, got {self.lam}")
        if not (self.mu >= 0 and math.isfinite(self.mu)):
            raise ConfigError(f"mu must be a finite value >= 0, got {self.mu}")
        if not self.objective_tol > 0:
            raise ConfigError("objective_tol must be positive")
        if self.epochs_per_theta_step < 0 or self.max_alternations < 1 or self.batch_size < 1:
            raise ConfigError("epochs must be >= 0, alternations and batch size >= 1")
        if not self.learning_rate >= 0:
            raise ConfigError("learning rate must be >= 0")


@dataclass
class ObjectiveTerms:
    data: float
    l1: float
    omega: float
    lam: float
    mu: float

    @property
    def total(self) -> float:
        return self.data + 0.5 * self.mu * self.omega + self.l1_weighted

    @property
    def l1_weighted(self) -> float:
        # inf * 0 must stay 0: lam = inf forces N = 0
        return 0.0 if self.l1 == 0.0 else self.lam * self.l1


@dataclass
class TraceRow:
    alternation: int
    objective: float
    data_term: float
    l1_term: float
    omega_term: float
    nnz: int
    accepted: bool = True


@dataclass
class RobustModel:
    network: Network
    noise: np.ndarray
    config: RobustConfig
    trace: list[TraceRow] = field(default_factory=list)

    @property
    def objective_trace(self) -> list[float]:
        return [row.objective for row in self.trace]

    def score(self, x_new) -> np.ndarray:
        return score(self, x_new)

    def reconstruct(self, x) -> np.ndarray:
        return self.network.predict(as_matrix(x))


def objective_terms(x, net: Network, noise, lam: float, mu: float, x_hat=None) -> ObjectiveTerms:
    x = as_matrix(x, "X")
    noise = np.asarray(noise, dtype=np.float64)
    if noise.shape != x.shape:
        raise ShapeError(f"noise shape {noise.shape} != data shape {x.shape}")
    if x_hat is None:
        x_hat = net.predict(x)
    r = x - x_hat - noise
    return ObjectiveTerms(data=float(np.sum(r * r)), l1=float(np.abs(noise).sum()),
                          omega=net.weight_penalty(), lam=lam, mu=mu)


def objective_value(x, net: Network, noise, lam: float, mu: float) -> float:
    return objective_terms(x, net, noise, lam, mu).total


def n_step(x, x_hat, lam: float) -> np.ndarray:
    """Closed-form minimiser over N of ``||N - (X - Xhat)||^2 + lam ||N||_1``."""
    x = np.asarray(x, dtype=np.float64)
    x_hat = np.asarray(x_hat, dtype=np.float64)
    if x.shape != x_hat.shape:
        raise ShapeError(f"data shape {x.shape} != reconstruction shape {x_hat.shape}")
    if not lam >= 0:
        raise ValueError(f"lambda must be >= 0, got {lam}")
    return soft_threshold(x - x_hat, lam / 2.0)


def train_autoencoder(net: Network, target, epochs: int, batch_size: int, mu: float,
                      adam: Adam, rng: np.random.Generator) -> list[float]:
    """Minibatch Adam on ``||target - net(target)||^2 + (mu/2) Omega``.

    The penalty is scaled by ``batch/n`` per minibatch so one epoch sums to
    the full objective.  Returns the summed loss of every epoch.
    """
    target = as_matrix(target, "training target")
    n = target.shape[0]
    if target.shape[1] != net.input_dim or not net.is_autoencoder():
        raise ShapeError(f"autoencoder {net.input_shape}->{net.output_shape} cannot fit data {target.shape}")
    mask = net.weight_mask()
    history = []
    for epoch in range(epochs):
        order = rng.permutation(n)
        epoch_loss = 0.0
        for bi, start in enumerate(range(0, n, batch_size)):
            rows = target[order[start:start + batch_size]]
            frac = rows.shape[0] / n
            out, cache = net.forward(rows, "train")
            diff = out - rows
            params = net.param_arrays()
            reg = sum(float(np.sum(p * p)) for p, w in zip(params, mask) if w)
            loss = float(np.sum(diff * diff)) + 0.5 * mu * frac * reg
            if not math.isfinite(loss):
                raise NonFiniteError(f"non-finite loss {loss} at epoch {epoch}, batch {bi}")
            grads = net.backward(cache, 2.0 * diff)
            if mu:
                grads = [g + mu * frac * p if w else g for g, p, w in zip(grads, params, mask)]
            adam.step(params, grads)
            net.mark_updated()
            epoch_loss += loss
        history.append(epoch_loss)
    return history


def theta_step(net: Network, x_minus_n, config: RobustConfig, adam: Adam, rng: np.random.Generator) -> Network:
    if config.learning_rate == 0 or config.epochs_per_theta_step == 0:
        return net
    train_autoencoder(net, x_minus_n, config.epochs_per_theta_step, config.batch_size, config.mu, adam, rng)
    return net


def _snapshot(net: Network):
    return ([a.copy() for a in net.param_arrays()],
            [{k: v.copy() for k, v in layer.state.items()} for layer in net.layers])


def _restore(net: Network, snap):
    params, states = snap
    for a, b in zip(net.param_arrays(), params):
        a[...] = b
    for layer, st in zip(net.layers, states):
        for k, v in st.items():
            layer.state[k] = v.copy()
    net.mark_updated()


def _trace_row(t, terms: ObjectiveTerms, noise, accepted=True) -> TraceRow:
    return TraceRow(t, terms.total, terms.data, terms.l1_weighted, 0.5 * terms.mu * terms.omega,
                    int(np.count_nonzero(np.abs(noise) > NONZERO_TOL)), accepted)


def train_rcae(x, specs, config: RobustConfig, input_shape=None, network: Network | None = None) -> RobustModel:
    """Fit a robust autoencoder to ``x`` by alternating theta- and N-steps.

    A theta-step that raises the objective (possible with stochastic Adam) is
    rolled back and the learning rate halved, so the objective recorded after
    every N-step never increases.  Stops when the relative change drops below
    ``objective_tol`` or after ``max_alternations``.
    """
    x = as_matrix(x, "X")
    rng = np.random.default_rng(config.seed)
    net = network if network is not None else build_network(
        specs, rng, config.init_scale, input_shape=input_shape, init=config.init)
    if net.input_dim != x.shape[1] or not net.is_autoencoder():
        raise ShapeError(f"network {net.input_shape}->{net.output_shape} cannot reconstruct data of width {x.shape[1]}")
    lam, mu = config.lam, config.mu
    noise = np.zeros_like(x)
    adam = Adam(net.param_arrays(), lr=config.learning_rate)

    terms = objective_terms(x, net, noise, lam, mu)
    trace = [_trace_row(0, terms, noise)]
    current = terms.total
    best = current
    for t in range(1, config.max_alternations + 1):
        snap, adam_state = _snapshot(net), adam.state_dict()
        theta_step(net, x - noise, config, adam, rng)
        after_theta = objective_value(x, net, noise, lam, mu)
        accepted = after_theta <= current
        if not accepted:
            _restore(net, snap)
            adam.load_state_dict(adam_state)
            adam.lr *= 0.5
            log.info("alternation %d: theta-step raised objective %.6g -> %.6g; rolled back, lr=%.3g",
                     t, current, after_theta, adam.lr)
        x_hat = net.predict(x)
        if math.isfinite(lam):
            noise = n_step(x, x_hat, lam)
        terms = objective_terms(x, net, noise, lam, mu, x_hat=x_hat)
        trace.append(_trace_row(t, terms, noise, accepted))
        previous, current = current, terms.total
        best = min(best, current)
        if not math.isfinite(current) or current > 10 * best:
            raise DivergenceError(f"objective diverged to {current} at alternation {t}", trace)
        log.debug("alternation %d: objective %.6g (nnz %d)", t, current, trace[-1].nnz)
        if accepted and abs(previous - current) <= config.objective_tol * max(abs(previous), 1e-300):
            break
    return RobustModel(net, noise, config, trace)


def score(model, x_new) -> np.ndarray:
    """Per-row squared reconstruction error ``||x_i - Xhat_i||^2``; N is not used."""
    net = model.network if isinstance(model, RobustModel) else model
    x_new = as_matrix(x_new, "scored data")
    if x_new.shape[1] != net.input_dim:
        raise ShapeError(f"model expects {net.input_dim} columns, got {x_new.shape[1]}")
    r = x_new - net.predict(x_new)
    return np.sum(r * r, axis=1)


def trace_csv(trace) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(TRACE_COLUMNS)
    for row in trace:
        w.writerow([row.alternation, repr(row.objective), repr(row.data_term), repr(row.l1_term),
                    repr(row.omega_term), row.nnz, int(row.accepted)])
    return buf.getvalue()


def write_trace_csv(trace, path):
    atomic_write_bytes(path, trace_csv(trace).encode())
