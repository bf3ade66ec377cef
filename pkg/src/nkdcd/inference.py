"""Granger-causal scores from a lag stack, thresholding, and ROC/PR metrics."""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import List, Tuple

import numpy as np

from .model import LagStack


class UndefinedMetricError(ValueError):
    """Truth has no positives or no negatives, so ROC/PR areas are undefined."""


@dataclass
class GcScores:
    scores: np.ndarray    # (n, n), row = target, col = source
    per_lag: np.ndarray   # (L, n, n) block norms

    @property
    def n(self) -> int:
        return self.scores.shape[0]


def score_gc(lags) -> GcScores:
    """Joint norm over all lags and lifted entries of each (target, source) pair.

    A pair scores exactly 0 only when every lag block is zero, i.e. the source
    is Granger non-causal for the target under the fitted model.  Accepts a
    ``LagStack`` or a raw ``(L, n, n)`` array of scalar lag matrices.
    """
    if not isinstance(lags, LagStack):
        w = np.asarray(lags, dtype=np.float64)
        lags = LagStack(w, w.shape[1], 1)
    per_lag = lags.block_norms()
    return GcScores(np.sqrt(np.sum(per_lag ** 2, axis=0)), per_lag)


def threshold_adjacency(scores, eps: float) -> np.ndarray:
    if eps < 0:
        raise ValueError(f"threshold must be >= 0, got {eps}")
    s = getattr(scores, "scores", scores)
    return (np.asarray(s) > eps).astype(np.int64)


def _pairs(scores, truth, include_self: bool) -> Tuple[np.ndarray, np.ndarray]:
    s = np.asarray(getattr(scores, "scores", scores), dtype=np.float64)
    y = np.asarray(truth)
    if s.shape != y.shape or s.ndim != 2 or s.shape[0] != s.shape[1]:
        raise ValueError(f"scores {s.shape} and truth {y.shape} must be the same square shape")
    mask = np.ones(s.shape, dtype=bool)
    if not include_self:
        np.fill_diagonal(mask, False)
    s, y = s[mask], (y[mask] != 0)
    if y.all() or not y.any():
        raise UndefinedMetricError("truth needs at least one positive and one negative pair")
    return s, y


def _sweep(s: np.ndarray, y: np.ndarray):
    """Cumulative TP/FP counts at each distinct threshold, highest first."""
    order = np.argsort(-s, kind="mergesort")
    s, y = s[order], y[order]
    last = np.r_[np.nonzero(np.diff(s))[0], s.shape[0] - 1]
    tp = np.cumsum(y)[last]
    fp = np.cumsum(~y)[last]
    return tp, fp, s[last]


def roc_curve(scores, truth, include_self: bool = True):
    """``(fpr, tpr, thresholds)`` starting at (0, 0); tied scores form one step."""
    s, y = _pairs(scores, truth, include_self)
    tp, fp, thr = _sweep(s, y)
    tpr = np.r_[0.0, tp / y.sum()]
    fpr = np.r_[0.0, fp / (~y).sum()]
    return fpr, tpr, np.r_[np.inf, thr]


def pr_curve(scores, truth, include_self: bool = True):
    """``(recall, precision, thresholds)`` at each distinct threshold."""
    s, y = _pairs(scores, truth, include_self)
    tp, fp, thr = _sweep(s, y)
    return tp / y.sum(), tp / (tp + fp), thr


def auroc(scores, truth, include_self: bool = True) -> float:
    fpr, tpr, _ = roc_curve(scores, truth, include_self)
    return float(np.sum(np.diff(fpr) * (tpr[1:] + tpr[:-1]) / 2.0))


def auroc_pairs(scores, truth, include_self: bool = True) -> float:
    """Mann-Whitney form: P(random positive outscores random negative), ties 1/2."""
    s, y = _pairs(scores, truth, include_self)
    pos, neg = s[y], s[~y]
    diff = pos[:, None] - neg[None, :]
    return float(((diff > 0).sum() + 0.5 * (diff == 0).sum()) / diff.size)


def aupr(scores, truth, include_self: bool = True) -> float:
    """Step-wise area: sum of precision times the recall gained at each threshold."""
    recall, precision, _ = pr_curve(scores, truth, include_self)
    return float(np.sum(np.diff(np.r_[0.0, recall]) * precision))


@dataclass
class MetricsReport:
    auroc: float
    aupr: float
    roc: List[Tuple[float, float]]
    pr: List[Tuple[float, float]]
    adjacency: np.ndarray
    epsilon: float
    confusion: dict = field(default_factory=dict)
    include_self: bool = True

    def to_dict(self) -> dict:
        return {
            "auroc": self.auroc,
            "aupr": self.aupr,
            "roc": [list(p) for p in self.roc],
            "pr": [list(p) for p in self.pr],
            "adjacency": self.adjacency.tolist(),
            "epsilon": self.epsilon,
            "confusion": self.confusion,
            "include_self": self.include_self,
        }


def evaluate(scores, truth, eps: float = 0.0, include_self: bool = True) -> MetricsReport:
    truth = np.asarray(truth)
    fpr, tpr, _ = roc_curve(scores, truth, include_self)
    recall, precision, _ = pr_curve(scores, truth, include_self)
    adj = threshold_adjacency(scores, eps)
    mask = np.ones(truth.shape, dtype=bool)
    if not include_self:
        np.fill_diagonal(mask, False)
    a, t = adj[mask] != 0, truth[mask] != 0
    confusion = {"tp": int((a & t).sum()), "fp": int((a & ~t).sum()),
                 "fn": int((~a & t).sum()), "tn": int((~a & ~t).sum())}
    return MetricsReport(
        auroc=auroc(scores, truth, include_self),
        aupr=aupr(scores, truth, include_self),
        roc=list(zip(fpr.tolist(), tpr.tolist())),
        pr=list(zip(recall.tolist(), precision.tolist())),
        adjacency=adj, epsilon=eps, confusion=confusion, include_self=include_self,
    )
