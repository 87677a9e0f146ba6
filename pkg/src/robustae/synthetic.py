"""Seeded synthetic datasets.  Generator equations are in docs/datasets.md.

Planted manifold
    Normal rows lie on a smooth 2-parameter surface in ``dims`` dimensions,

        x_j(t, s) = 0.5 + 0.3 * sin(2*pi*(a_j*t + b_j*s) + phi_j),
        a_j = 0.5 + j/(dims-1),  b_j = 1.5 - j/(dims-1),  phi_j = 2*pi*j/dims,

    with (t, s) ~ U[0,1]^2 plus N(0, jitter^2) noise per coordinate.  Anomalous
    rows are manifold points whose coordinates are each replaced, with
    probability ``corrupt_frac``, by an independent U[0, 1] draw.

Digit pair
    16x16 grey images of strokes.  Normal rows are '1's (one near-vertical
    stroke, optional top flag and base serif); anomalies are '7's (a top bar
    joined to a descending diagonal).  Stroke geometry is jittered per image
    and pixel noise is added.
"""

from __future__ import annotations

import numpy as np

from .data import LabeledDataset

JITTER = 0.01
CORRUPT_FRAC = 0.3


def manifold_coefficients(dims: int):
    j = np.arange(dims)
    a = 0.5 + j / (dims - 1)
    b = 1.5 - j / (dims - 1)
    phi = 2 * np.pi * j / dims
    return a, b, phi


def manifold_points(t, s, dims: int) -> np.ndarray:
    a, b, phi = manifold_coefficients(dims)
    t = np.asarray(t, dtype=np.float64)[:, None]
    s = np.asarray(s, dtype=np.float64)[:, None]
    return 0.5 + 0.3 * np.sin(2 * np.pi * (a * t + b * s) + phi)


def make_synthetic_manifold(n_normal: int, n_anomaly: int, dims: int, rng: np.random.Generator,
                            jitter: float = JITTER, corrupt_frac: float = CORRUPT_FRAC) -> LabeledDataset:
    if dims < 3:
        raise ValueError("the planted manifold needs dims >= 3")
    n = n_normal + n_anomaly
    t, s = rng.random(n), rng.random(n)
    x = manifold_points(t, s, dims) + jitter * rng.standard_normal((n, dims))
    labels = np.zeros(n, dtype=np.int64)
    if n_anomaly:
        rows = np.arange(n_normal, n)
        hit = rng.random((n_anomaly, dims)) < corrupt_frac
        # at least one corrupted coordinate per anomalous row
        hit[np.arange(n_anomaly), rng.integers(0, dims, n_anomaly)] = True
        x[rows] = np.where(hit, rng.random((n_anomaly, dims)), x[rows])
        labels[rows] = 1
    order = rng.permutation(n)
    return LabeledDataset(x[order], labels[order], None, f"manifold(d={dims})")


def _segment_ink(yy, xx, p0, p1, width):
    d = p1 - p0
    length2 = float(d @ d) or 1e-12
    rel_y, rel_x = yy - p0[0], xx - p0[1]
    u = np.clip((rel_y * d[0] + rel_x * d[1]) / length2, 0.0, 1.0)
    dy, dx = rel_y - u * d[0], rel_x - u * d[1]
    return np.exp(-(dy * dy + dx * dx) / (2 * width * width))


def _render(strokes, size, width):
    yy, xx = np.mgrid[0:size, 0:size].astype(np.float64) + 0.5
    img = np.zeros((size, size))
    for p0, p1 in strokes:
        img = np.maximum(img, _segment_ink(yy, xx, np.asarray(p0, float), np.asarray(p1, float), width))
    return img


def _one(rng, size):
    cx = size / 2 + rng.uniform(-0.75, 0.75)
    top, bottom = rng.uniform(1.0, 2.0), size - rng.uniform(1.0, 2.0)
    slant = rng.uniform(-0.25, 0.25) * (bottom - top)
    p_top, p_bot = (top, cx + slant / 2), (bottom, cx - slant / 2)
    strokes = [(p_top, p_bot)]
    if rng.random() < 0.4:
        flag = rng.uniform(1.5, 3.0)
        strokes.append((p_top, (top + flag * 0.8, p_top[1] - flag)))
    if rng.random() < 0.3:
        half = rng.uniform(1.5, 3.0)
        strokes.append(((bottom, p_bot[1] - half), (bottom, p_bot[1] + half)))
    return strokes


def _seven(rng, size):
    top = rng.uniform(2.0, 4.0)
    left = rng.uniform(2.0, 5.5)
    right = size - rng.uniform(2.0, 4.5)
    bottom = size - rng.uniform(1.5, 3.5)
    foot = rng.uniform(size * 0.3, size * 0.6)
    tilt = rng.uniform(-0.8, 0.8)
    strokes = [((top + tilt, left), (top - tilt, right)), ((top - tilt, right), (bottom, foot))]
    if rng.random() < 0.2:
        mid = (top + bottom) / 2
        cx = (right + foot) / 2
        strokes.append(((mid, cx - 2.0), (mid, cx + 2.0)))
    return strokes


def make_digit_pair(n_normal: int, n_anomaly: int, rng: np.random.Generator, size: int = 16,
                    noise: float = 0.05) -> LabeledDataset:
    """Surrogate for the '1' (normal) vs '7' (anomaly) handwritten-digit task."""
    n = n_normal + n_anomaly
    x = np.empty((n, size * size))
    for i in range(n):
        strokes = _one(rng, size) if i < n_normal else _seven(rng, size)
        img = _render(strokes, size, rng.uniform(0.6, 1.1))
        img = img * rng.uniform(0.8, 1.0) + noise * rng.standard_normal(img.shape)
        x[i] = np.clip(img, 0.0, 1.0).ravel()
    labels = np.r_[np.zeros(n_normal, dtype=np.int64), np.ones(n_anomaly, dtype=np.int64)]
    order = rng.permutation(n)
    return LabeledDataset(x[order], labels[order], (1, size, size), "digit-pair(1 vs 7)")


def make_planted_line(n_normal: int, rng: np.random.Generator, n_anomaly: int = 1,
                      jitter: float = 0.01) -> LabeledDataset:
    """Points near the line y = 0.2 + 0.6 x in the unit square plus off-line outliers.

    Outliers sit at distance >= 0.3 from the line.
    """
    t = rng.random(n_normal)
    normal = np.c_[t, 0.2 + 0.6 * t] + jitter * rng.standard_normal((n_normal, 2))
    u = rng.uniform(0.2, 0.8, n_anomaly)
    side = np.where(rng.random(n_anomaly) < 0.5, -1.0, 1.0)
    # unit normal of the line is (-0.6, 1) / sqrt(1.36)
    off = rng.uniform(0.3, 0.4, n_anomaly)[:, None] * side[:, None] * np.array([-0.6, 1.0]) / np.sqrt(1.36)
    anomaly = np.c_[u, 0.2 + 0.6 * u] + off
    x = np.vstack([normal, anomaly])
    labels = np.r_[np.zeros(n_normal, dtype=np.int64), np.ones(n_anomaly, dtype=np.int64)]
    order = rng.permutation(x.shape[0])
    return LabeledDataset(x[order], labels[order], None, "planted-line")
