"""Comparison methods: PCA, plain autoencoder, convex/factored robust PCA, DRMF.

Each ``fit_*`` returns a :class:`DecompositionResult` whose ``scores`` are the
per-row squared reconstruction errors ``||X_i - S_i||^2``.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field

import numpy as np

from .errors import ConfigError
from .linalg import as_matrix, soft_threshold, spectral_norm, svt, top_k_svd
from .network import Adam, activation, build_network, dense

log = logging.getLogger(__name__)


@dataclass
class DecompositionResult:
    s: np.ndarray
    n: np.ndarray
    scores: np.ndarray
    iterations: int = 0
    converged: bool = True
    residual: float = 0.0
    history: list = field(default_factory=list)
    extra: dict = field(default_factory=dict)

    @property
    def noise_scores(self) -> np.ndarray:
        """Per-row l1 mass of the noise matrix."""
        return np.abs(self.n).sum(axis=1)


def rowwise_error(x_hat, x) -> np.ndarray:
    r = np.asarray(x, dtype=np.float64) - x_hat
    return np.sum(r * r, axis=1)


def _check_rank(k, x, upper=None):
    upper = min(x.shape) if upper is None else upper
    if not 1 <= k <= upper:
        raise ConfigError(f"rank k={k} out of range [1, {upper}] for a {x.shape[0]}x{x.shape[1]} matrix")


def fit_pca_svd(x, k: int) -> DecompositionResult:
    """Project centred rows onto the top-``k`` principal directions."""
    x = as_matrix(x, "X")
    _check_rank(k, x, upper=x.shape[1])
    mean = x.mean(axis=0)
    xc = x - mean
    k_eff = min(k, min(x.shape))
    res = top_k_svd(xc, k_eff, tol=1e-10, max_iter=5000)
    s = (xc @ res.v) @ res.v.T + mean
    return DecompositionResult(s=s, n=np.zeros_like(x), scores=rowwise_error(s, x),
                               iterations=res.iterations,
                               extra={"components": res.v, "mean": mean})


def default_rpca_lambda(x) -> float:
    return 1.0 / math.sqrt(max(np.shape(x)))


def fit_rpca_convex(x, lam: float | None = None, tol: float = 1e-7, max_iter: int = 1000,
                    rho: float = 1.5) -> DecompositionResult:
    """Principal component pursuit, ``min ||S||_* + lam ||N||_1 s.t. X = S + N``.

    Inexact augmented Lagrangian: alternate singular value thresholding for S
    and soft thresholding for N, then a multiplier step; the penalty starts
    at ``1.25 / ||X||_2`` and grows by ``rho`` per iteration.  Converged when
    both the primal residual ``||X - S - N||_F`` and the change in ``S`` are
    below ``tol * ||X||_F``.
    """
    x = as_matrix(x, "X")
    if lam is None:
        lam = default_rpca_lambda(x)
    if not lam > 0:
        raise ConfigError(f"RPCA lambda must be positive, got {lam}")
    xnorm = float(np.linalg.norm(x))
    if xnorm == 0.0:
        return DecompositionResult(s=x.copy(), n=np.zeros_like(x), scores=np.zeros(x.shape[0]))
    two = spectral_norm(x)
    y = x / max(two, np.abs(x).max() / lam)
    pen = 1.25 / two
    pen_max = pen * 1e7
    s = np.zeros_like(x)
    n = np.zeros_like(x)
    history = []
    converged = False
    it = 0
    primal = np.inf
    for it in range(1, max_iter + 1):
        s_new = svt(x - n + y / pen, 1.0 / pen)
        n = soft_threshold(x - s_new + y / pen, lam / pen)
        z = x - s_new - n
        primal = float(np.linalg.norm(z)) / xnorm
        dual = pen * float(np.linalg.norm(s_new - s)) / xnorm
        change = float(np.linalg.norm(s_new - s)) / xnorm
        history.append((primal, dual))
        s = s_new
        y += pen * z
        pen = min(pen * rho, pen_max)
        if primal < tol and change < tol:
            converged = True
            break
    if not converged:
        log.warning("convex RPCA stopped after %d iterations, residual %.3e", it, primal)
    return DecompositionResult(s=s, n=n, scores=rowwise_error(s, x),
                               iterations=it, converged=converged, residual=primal,
                               history=history, extra={"lam": lam})


def factored_objective(x, w, v, n, lam: float, mu: float) -> float:
    """``||X - (WV + N)||_F^2 + (mu/2)(||W||^2 + ||V||^2) + lam ||N||_1``."""
    r = x - w @ v - n
    l1 = float(np.abs(n).sum())
    return float(np.sum(r * r)) + 0.5 * mu * float(np.sum(w * w) + np.sum(v * v)) + (lam * l1 if l1 else 0.0)


def _ridge_solve(gram, rhs, mu_half):
    """Solve ``(gram + mu_half I) Z = rhs`` for a symmetric PSD ``gram``.

    If the shifted system is numerically singular the ridge is raised to a
    floor of 1e-12 times the largest eigenvalue (at least 1e-12) with a warning.
    """
    k = gram.shape[0]
    ev = np.linalg.eigvalsh(gram)
    floor = 1e-12 * max(float(ev[-1]), 1.0)
    ridge = mu_half
    if ev[0] + ridge < floor:
        ridge = floor - min(float(ev[0]), 0.0)
        log.warning("singular ridge system in factored RPCA; raising regularisation floor to %.3g", ridge)
    return np.linalg.solve(gram + ridge * np.eye(k), rhs)


def fit_rpca_factored(x, k: int, lam: float, mu: float, tol: float = 1e-9,
                      max_iter: int = 2000) -> DecompositionResult:
    """Alternating closed-form minimisation of :func:`factored_objective`.

    W and V are ridge regressions, N is soft thresholding at ``lam/2``; each
    block update is exact, so the objective never increases.  W, V start
    from the top-``k`` SVD of X split as ``U sqrt(S)`` and ``sqrt(S) V^T``.
    """
    x = as_matrix(x, "X")
    _check_rank(k, x)
    if lam < 0 or mu < 0:
        raise ConfigError("lambda and mu must be >= 0")
    init = top_k_svd(x, k, tol=1e-10, max_iter=5000)
    root = np.sqrt(init.sigma)
    w = init.u * root
    v = (init.v * root).T
    n = np.zeros_like(x)
    obj = factored_objective(x, w, v, n, lam, mu)
    history = [obj]
    converged = False
    it = 0
    for it in range(1, max_iter + 1):
        r = x - n
        w = _ridge_solve(v @ v.T, v @ r.T, mu / 2).T
        history.append(factored_objective(x, w, v, n, lam, mu))
        v = _ridge_solve(w.T @ w, w.T @ r, mu / 2)
        history.append(factored_objective(x, w, v, n, lam, mu))
        if math.isfinite(lam):
            n = soft_threshold(x - w @ v, lam / 2)
        new = factored_objective(x, w, v, n, lam, mu)
        history.append(new)
        if abs(obj - new) <= tol * max(obj, 1e-300):
            converged = True
            obj = new
            break
        obj = new
    return DecompositionResult(s=w @ v, n=n, scores=rowwise_error(w @ v, x),
                               iterations=it, converged=converged, residual=obj,
                               history=history, extra={"w": w, "v": v})


def _top_e(r: np.ndarray, e: int) -> np.ndarray:
    """Keep the ``e`` largest-magnitude entries; ties go to the lowest linear index."""
    out = np.zeros_like(r)
    if e <= 0:
        return out
    flat = r.ravel()
    keep = np.argsort(-np.abs(flat), kind="stable")[:e]
    out.ravel()[keep] = flat[keep]
    return out


def fit_drmf(x, k: int, e: int, tol: float = 1e-9, max_iter: int = 500) -> DecompositionResult:
    """Direct robust matrix factorisation: ``rank(S) <= k``, ``||N||_0 <= e``.

    Alternates the optimal rank-``k`` approximation of ``X - N`` with keeping
    the ``e`` largest residual entries of ``X - S``.
    """
    x = as_matrix(x, "X")
    _check_rank(k, x)
    if not 0 <= e <= x.size:
        raise ConfigError(f"noise budget e={e} must lie in [0, {x.size}]")
    n = np.zeros_like(x)
    v0 = None
    obj = np.inf
    history = []
    converged = False
    it = 0
    for it in range(1, max_iter + 1):
        res = top_k_svd(x - n, k, tol=1e-12, max_iter=5000, v0=v0)
        v0 = res.v
        s = res.reconstruct()
        n = _top_e(x - s, e)
        r = x - s - n
        new = float(np.sum(r * r))
        history.append(new)
        if new == 0.0 or (math.isfinite(obj) and obj - new <= tol * max(obj, 1e-300)):
            converged = True
            break
        obj = new
    if not converged:
        log.warning("DRMF stopped after %d sweeps", it)
    return DecompositionResult(s=s, n=n, scores=rowwise_error(s, x),
                               iterations=it, converged=converged, residual=history[-1],
                               history=history)


def plain_ae_specs(input_dim: int, hidden: int, deep: bool = False):
    """Dense autoencoder with a sigmoid decoding layer.

    ``deep=True`` gives the three-hidden-layer shape d - d/4 - hidden - d/4 - d.
    """
    if deep:
        mid = max(hidden, input_dim // 4)
        return [dense(input_dim, mid), activation("relu"), dense(mid, hidden), activation("relu"),
                dense(hidden, mid), activation("relu"), dense(mid, input_dim), activation("sigmoid")]
    return [dense(input_dim, hidden), activation("sigmoid"), dense(hidden, input_dim), activation("sigmoid")]


def fit_plain_ae(x, hidden: int, epochs: int = 500, batch_size: int = 32, learning_rate: float = 1e-3,
                 mu: float = 0.0, seed: int = 0, deep: bool = False, init: str = "scaled"):
    """Train a dense autoencoder on ``x`` and score rows by reconstruction error.

    Returns ``(scores, network, loss_history)``.
    """
    from .trainer import score, train_autoencoder

    x = as_matrix(x, "X")
    rng = np.random.default_rng(seed)
    net = build_network(plain_ae_specs(x.shape[1], hidden, deep), rng, init=init)
    adam = Adam(net.param_arrays(), lr=learning_rate)
    history = train_autoencoder(net, x, epochs, batch_size, mu, adam, rng)
    return score(net, x), net, history


__all__ = [
    "DecompositionResult", "default_rpca_lambda", "factored_objective", "fit_drmf",
    "fit_pca_svd", "fit_plain_ae", "fit_rpca_convex", "fit_rpca_factored", "plain_ae_specs", "rowwise_error",
]
