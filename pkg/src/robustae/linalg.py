"""Dense linear algebra used throughout the package.

Matrices are plain ``numpy.ndarray`` objects of dtype float64 and shape
``(rows, cols)``.  Every public routine validates its inputs and refuses to
return non-finite output.
"""

from __future__ import annotations

from typing import NamedTuple

import numpy as np

from .errors import ConvergenceError, NonFiniteError, ShapeError

# entries with |x| <= this count as zero for the l0 "norm"
NONZERO_TOL = 1e-12


class SvdResult(NamedTuple):
    u: np.ndarray  # (rows, k), orthonormal columns
    sigma: np.ndarray  # (k,), non-increasing, >= 0
    v: np.ndarray  # (cols, k), orthonormal columns
    iterations: int = 0

    def reconstruct(self) -> np.ndarray:
        return (self.u * self.sigma) @ self.v.T


class Norms(NamedTuple):
    frobenius: float
    l1: float
    l0: int
    trace: float


def as_matrix(a, name: str = "matrix") -> np.ndarray:
    """Coerce ``a`` to a finite 2-D float64 array (a copy is made only if needed)."""
    m = np.asarray(a, dtype=np.float64)
    if m.ndim != 2:
        raise ShapeError(f"{name} must be 2-D, got shape {m.shape}")
    check_finite(m, name)
    return m


def check_finite(m: np.ndarray, what: str = "result") -> np.ndarray:
    if not np.all(np.isfinite(m)):
        bad = int(np.size(m) - np.count_nonzero(np.isfinite(m)))
        raise NonFiniteError(f"{what} contains {bad} non-finite entries")
    return m


def matmul(a, b) -> np.ndarray:
    a = as_matrix(a, "left operand")
    b = as_matrix(b, "right operand")
    if a.shape[1] != b.shape[0]:
        raise ShapeError(f"cannot multiply {a.shape[0]}x{a.shape[1]} by {b.shape[0]}x{b.shape[1]}")
    return check_finite(a @ b, "matmul")


def soft_threshold(r, tau: float) -> np.ndarray:
    """Elementwise shrinkage toward zero by ``tau``: the prox of ``tau * ||.||_1``."""
    if not tau >= 0:
        raise ValueError(f"threshold must be non-negative, got {tau}")
    r = np.asarray(r, dtype=np.float64)
    check_finite(r, "soft_threshold input")
    if np.isinf(tau):
        return np.zeros_like(r)
    return np.sign(r) * np.maximum(np.abs(r) - tau, 0.0)


def svd(m) -> SvdResult:
    """Thin SVD of ``m`` (LAPACK gesdd via numpy)."""
    m = as_matrix(m)
    try:
        u, s, vt = np.linalg.svd(m, full_matrices=False)
    except np.linalg.LinAlgError as exc:
        raise ConvergenceError(f"SVD of {m.shape[0]}x{m.shape[1]} matrix failed: {exc}") from exc
    return SvdResult(u, s, vt.T, 1)


def _orthonormalize(a: np.ndarray) -> np.ndarray:
    q, r = np.linalg.qr(a)
    # fix column signs so the result is a deterministic function of ``a``
    signs = np.sign(np.diag(r))
    signs[signs == 0] = 1.0
    return q * signs


def top_k_svd(m, k: int, tol: float = 1e-7, max_iter: int = 1000,
              v0: np.ndarray | None = None, oversample: int = 8) -> SvdResult:
    """Leading ``k`` singular triplets by block power (subspace) iteration.

    Each iteration multiplies an orthonormal block of right vectors through
    ``m`` and ``m.T`` and takes a Rayleigh-Ritz step on the small projected
    matrix.  Stops when the relative change of the ``k`` leading singular
    values drops below ``tol``.  ``v0`` (cols x >=k) warm-starts the block.
    """
    m = as_matrix(m)
    n, d = m.shape
    if not 1 <= k <= min(n, d):
        raise ValueError(f"k={k} out of range for a {n}x{d} matrix")
    if not tol > 0:
        raise ValueError("tol must be positive")

    p = min(k + oversample, min(n, d))
    scale = np.abs(m).max()
    if scale == 0.0:
        return SvdResult(np.eye(n, k), np.zeros(k), np.eye(d, k), 0)

    if v0 is not None:
        v0 = np.asarray(v0, dtype=np.float64)
        if v0.shape[0] != d or v0.shape[1] < k:
            raise ShapeError(f"warm start of shape {v0.shape} does not fit {n}x{d}, k={k}")
        block = v0[:, :p]
        if block.shape[1] < p:
            fill = np.random.default_rng(0).standard_normal((d, p - block.shape[1]))
            block = np.hstack([block, fill])
    else:
        block = np.random.default_rng(0).standard_normal((d, p))
    q = _orthonormalize(block)

    prev = None
    change = np.inf
    for it in range(1, max_iter + 1):
        qu = _orthonormalize(m @ q)
        ub, s, vbt = np.linalg.svd(qu.T @ m, full_matrices=False)
        q = vbt.T
        sig = s[:k]
        if p == min(n, d):
            # the block spans the whole row space, so Rayleigh-Ritz is exact
            change = 0.0
        elif prev is not None:
            change = float(np.max(np.abs(sig - prev)) / max(sig[0], 1e-300))
        if change < tol:
            u = qu @ ub[:, :k]
            return SvdResult(check_finite(u), sig.copy(), q[:, :k].copy(), it)
        prev = sig
    raise ConvergenceError(
        f"top_k_svd(k={k}) did not converge in {max_iter} iterations (residual {change:.3e})",
        iterations=max_iter, residual=change)


def spectral_norm(m) -> float:
    return float(top_k_svd(m, 1, tol=1e-10).sigma[0])


def svt(m, tau: float) -> np.ndarray:
    """Singular value thresholding: the prox of ``tau * ||.||_*``."""
    if not tau >= 0:
        raise ValueError(f"threshold must be non-negative, got {tau}")
    res = svd(m)
    s = np.maximum(res.sigma - tau, 0.0)
    keep = s > 0
    return check_finite((res.u[:, keep] * s[keep]) @ res.v[:, keep].T, "svt")


def trace_norm(m) -> float:
    return float(np.sum(svd(m).sigma))


def norms(m) -> Norms:
    m = as_matrix(m)
    if m.size == 0:
        return Norms(0.0, 0.0, 0, 0.0)
    return Norms(
        frobenius=float(np.linalg.norm(m)),
        l1=float(np.abs(m).sum()),
        l0=int(np.count_nonzero(np.abs(m) > NONZERO_TOL)),
        trace=trace_norm(m),
    )
