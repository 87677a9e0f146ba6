"""Independent reference implementations used only by the tests.

Each routine is deliberately naive (explicit loops, brute force) and shares
no code with the package under test.
"""

import math

import numpy as np


def matmul_loops(a, b):
    n, m = len(a), len(b[0])
    inner = len(b)
    out = [[0.0] * m for _ in range(n)]
    for i in range(n):
        for j in range(m):
            s = 0.0
            for t in range(inner):
                s += a[i][t] * b[t][j]
            out[i][j] = s
    return np.array(out)


def jacobi_eigh(sym, tol=1e-14, max_sweeps=100):
    """Cyclic Jacobi rotations; returns (eigenvalues descending, eigenvectors as columns)."""
    a = np.array(sym, dtype=float, copy=True)
    n = a.shape[0]
    v = np.eye(n)
    for _ in range(max_sweeps):
        off = math.sqrt(sum(a[i, j] ** 2 for i in range(n) for j in range(n) if i != j))
        if off < tol * max(1.0, float(np.abs(a).max())):
            break
        for p in range(n - 1):
            for q in range(p + 1, n):
                if abs(a[p, q]) < 1e-300:
                    continue
                theta = (a[q, q] - a[p, p]) / (2.0 * a[p, q])
                t = math.copysign(1.0, theta) / (abs(theta) + math.sqrt(theta * theta + 1.0))
                c = 1.0 / math.sqrt(t * t + 1.0)
                s = t * c
                for k in range(n):
                    akp, akq = a[k, p], a[k, q]
                    a[k, p] = c * akp - s * akq
                    a[k, q] = s * akp + c * akq
                for k in range(n):
                    apk, aqk = a[p, k], a[q, k]
                    a[p, k] = c * apk - s * aqk
                    a[q, k] = s * apk + c * aqk
                for k in range(n):
                    vkp, vkq = v[k, p], v[k, q]
                    v[k, p] = c * vkp - s * vkq
                    v[k, q] = s * vkp + c * vkq
    w = np.diag(a).copy()
    order = np.argsort(-w)
    return w[order], v[:, order]


def singular_values_jacobi(m):
    """Singular values via the Jacobi eigendecomposition of the smaller Gram matrix."""
    m = np.asarray(m, dtype=float)
    gram = m.T @ m if m.shape[0] >= m.shape[1] else m @ m.T
    w, _ = jacobi_eigh(gram)
    return np.sqrt(np.clip(w, 0.0, None))


def svd_jacobi(m):
    """Thin SVD built from the Jacobi eigenvectors of m^T m (full column rank expected)."""
    m = np.asarray(m, dtype=float)
    w, v = jacobi_eigh(m.T @ m)
    sigma = np.sqrt(np.clip(w, 0.0, None))
    u = (m @ v) / np.where(sigma > 0, sigma, 1.0)
    return u, sigma, v


def prox_grid(r, tau, step=1e-4):
    """argmin_n (n - r)^2 + 2 tau |n| over a grid covering [-|r|-1, |r|+1]."""
    half = abs(r) + 1.0
    grid = np.arange(-half, half + step / 2, step)
    grid = np.append(grid, 0.0)
    obj = (grid - r) ** 2 + 2.0 * tau * np.abs(grid)
    return float(grid[np.argmin(obj)])


def auroc_pairs(scores, labels):
    pos = [s for s, y in zip(scores, labels) if y == 1]
    neg = [s for s, y in zip(scores, labels) if y == 0]
    total = 0.0
    for p in pos:
        for q in neg:
            total += 1.0 if p > q else (0.5 if p == q else 0.0)
    return total / (len(pos) * len(neg))


def _order(scores):
    # descending score, ascending index for ties
    return sorted(range(len(scores)), key=lambda i: (-scores[i], i))


def auprc_staircase(scores, labels):
    order = _order(scores)
    n_pos = sum(labels)
    tp = 0
    area = 0.0
    for rank, i in enumerate(order, start=1):
        if labels[i] == 1:
            tp += 1
            area += (tp / rank) * (1.0 / n_pos)
    return area


def precision_at_k_sorted(scores, labels, k):
    order = _order(scores)
    return sum(labels[i] for i in order[:k]) / k


def conv2d_loops(x, w, b, pad):
    """Direct stride-1 convolution (cross-correlation) with zero padding."""
    bsz, ci, h, wd = x.shape
    co, _, f, _ = w.shape
    xp = np.zeros((bsz, ci, h + 2 * pad, wd + 2 * pad))
    xp[:, :, pad:pad + h, pad:pad + wd] = x
    ho, wo = h + 2 * pad - f + 1, wd + 2 * pad - f + 1
    out = np.zeros((bsz, co, ho, wo))
    for n in range(bsz):
        for o in range(co):
            for i in range(ho):
                for j in range(wo):
                    out[n, o, i, j] = np.sum(xp[n, :, i:i + f, j:j + f] * w[o]) + b[o]
    return out


def manifold_distance(points, dims, grid=401):
    """Nearest distance from each row to the planted surface by dense (t, s) grid search."""
    a = 0.5 + np.arange(dims) / (dims - 1)
    b = 1.5 - np.arange(dims) / (dims - 1)
    phi = 2 * np.pi * np.arange(dims) / dims
    t, s = np.meshgrid(np.linspace(0, 1, grid), np.linspace(0, 1, grid), indexing="ij")
    t, s = t.ravel(), s.ravel()
    surf = np.empty((t.size, dims))
    for j in range(dims):
        surf[:, j] = 0.5 + 0.3 * np.sin(2 * np.pi * (a[j] * t + b[j] * s) + phi[j])
    sq = np.sum(surf * surf, axis=1)
    out = []
    for p in np.atleast_2d(points):
        d2 = sq - 2 * surf @ p + p @ p
        out.append(math.sqrt(max(float(d2.min()), 0.0)))
    return np.array(out)


def mean_stderr_two_pass(values):
    vals = [float(v) for v in values]
    n = len(vals)
    mean = sum(vals) / n
    var = sum((v - mean) ** 2 for v in vals) / (n - 1)
    return mean, math.sqrt(var) / math.sqrt(n)
