"""Ranking metrics for anomaly scores (label 1 = anomaly, larger score = more anomalous).

Rows are ranked by descending score with ties broken by ascending row index.
AUROC gives half credit to tied anomaly/normal pairs; average precision
walks the deterministic ranking without interpolation.
"""

from __future__ import annotations

import math

import numpy as np

from .errors import DataError


def _prepare(scores, labels):
    s = np.asarray(scores, dtype=np.float64).ravel()
    y = np.asarray(labels).ravel()
    if s.shape != y.shape:
        raise DataError(f"{s.size} scores but {y.size} labels")
    if not np.all(np.isfinite(s)):
        raise DataError("scores must be finite")
    if not np.all((y == 0) | (y == 1)):
        raise DataError("labels must be binary 0/1")
    return s, y.astype(np.int64)


def ranking(scores) -> np.ndarray:
    """Row indices ordered by descending score, ties by ascending index."""
    s = np.asarray(scores, dtype=np.float64).ravel()
    return np.argsort(-s, kind="stable")


def _average_ranks(s):
    # 1-based ranks in ascending order, tied values share their mean rank
    order = np.argsort(s, kind="stable")
    sorted_s = s[order]
    starts = np.r_[0, np.flatnonzero(np.diff(sorted_s)) + 1]
    ends = np.r_[starts[1:], s.size]
    mean_rank = (starts + ends + 1) / 2.0
    ranks = np.empty(s.size)
    ranks[order] = np.repeat(mean_rank, ends - starts)
    return ranks


def auroc(scores, labels) -> float:
    """Mann-Whitney form: P(anomaly scores above normal) + 0.5 P(tie)."""
    s, y = _prepare(scores, labels)
    n_pos = int(y.sum())
    n_neg = y.size - n_pos
    if n_pos == 0 or n_neg == 0:
        raise DataError("AUROC needs at least one anomaly and one normal row")
    ranks = _average_ranks(s)
    u = ranks[y == 1].sum() - n_pos * (n_pos + 1) / 2.0
    return float(u / (n_pos * n_neg))


def auprc(scores, labels) -> float:
    """Average precision: mean over anomalies of the precision at their rank."""
    s, y = _prepare(scores, labels)
    if y.sum() == 0:
        raise DataError("AUPRC needs at least one anomaly")
    hits = y[ranking(s)]
    tp = np.cumsum(hits)
    precision = tp / np.arange(1, y.size + 1)
    return float(precision[hits == 1].mean())


def precision_at_k(scores, labels, k: int = 10) -> float:
    s, y = _prepare(scores, labels)
    if k <= 0:
        raise DataError("k must be positive")
    if k > y.size:
        raise DataError(f"k={k} exceeds the {y.size} scored rows")
    return float(y[ranking(s)[:k]].sum() / k)


def aggregate_runs(values) -> tuple[float, float]:
    """Mean and standard error (sample std / sqrt(runs)) over seeds."""
    v = np.asarray(values, dtype=np.float64).ravel()
    if v.size < 2:
        raise DataError("aggregation needs at least two runs")
    return float(v.mean()), float(v.std(ddof=1) / math.sqrt(v.size))


def evaluate(scores, labels, k: int = 10) -> dict:
    """All three protocol metrics; P@k is clipped to the number of rows."""
    s, y = _prepare(scores, labels)
    return {
        "auprc": auprc(s, y),
        "auroc": auroc(s, y),
        f"p_at_{k}": precision_at_k(s, y, min(k, y.size)),
    }
