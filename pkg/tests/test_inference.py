import itertools

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

import oracles
from nkdcd.inference import (UndefinedMetricError, aupr, auroc, auroc_pairs, evaluate, pr_curve,
                             roc_curve, score_gc, threshold_adjacency)
from nkdcd.model import LagStack


def brute_auroc(s, y):
    pos = [a for a, t in zip(s, y) if t]
    neg = [a for a, t in zip(s, y) if not t]
    wins = sum(1.0 if p > q else 0.5 if p == q else 0.0 for p, q in itertools.product(pos, neg))
    return wins / (len(pos) * len(neg))


def brute_aupr(s, y):
    """Sweep every distinct score as a threshold (keep scores >= it)."""
    P = sum(y)
    area, prev_recall = 0.0, 0.0
    for thr in sorted(set(s), reverse=True):
        kept = [t for a, t in zip(s, y) if a >= thr]
        tp = sum(kept)
        recall = tp / P
        area += (recall - prev_recall) * tp / len(kept)
        prev_recall = recall
    return area


def test_score_gc_single_entry():
    W = np.zeros((3, 10 * 2, 10 * 2))
    W[1, 3 * 2, 7 * 2] = 4.0
    s = score_gc(LagStack(W, 10, 2))
    assert s.scores[3, 7] == 4.0
    assert s.scores.sum() == 4.0
    assert s.per_lag[1, 3, 7] == 4.0


def test_score_gc_matches_group_norm_oracle():
    lags = LagStack(np.random.default_rng(0).normal(size=(3, 8, 8)), 4, 2)
    s = score_gc(lags)
    for i in range(4):
        for j in range(4):
            per = [oracles.block_norm(lags, l, i, j) for l in range(3)]
            assert s.scores[i, j] == pytest.approx(np.sqrt(sum(p * p for p in per)))
            np.testing.assert_allclose(s.per_lag[:, i, j], per)


def test_score_zero_iff_all_blocks_zero():
    W = np.random.default_rng(1).normal(size=(2, 3, 3))
    W[:, 0, 2] = 0.0
    W[0, 1, 1] = 0.0
    s = score_gc(W)
    assert s.scores[0, 2] == 0.0
    assert s.scores[1, 1] > 0.0
    assert score_gc(np.zeros((2, 3, 3))).scores.sum() == 0.0


def test_threshold_examples():
    s = np.array([[0.2, 0.5], [0.9, 0.1]])
    np.testing.assert_array_equal(threshold_adjacency(s, 0.0), np.ones((2, 2)))
    np.testing.assert_array_equal(threshold_adjacency(s, 1.0), np.zeros((2, 2)))
    np.testing.assert_array_equal(threshold_adjacency(s, 0.6), [[0, 0], [1, 0]])
    with pytest.raises(ValueError):
        threshold_adjacency(s, -1.0)


@settings(max_examples=50, deadline=None)
@given(st.integers(0, 10_000), st.floats(0, 2), st.floats(0, 2))
def test_threshold_monotone(seed, e1, e2):
    s = np.abs(np.random.default_rng(seed).normal(size=(5, 5)))
    lo, hi = sorted((e1, e2))
    assert np.all(threshold_adjacency(s, hi) <= threshold_adjacency(s, lo))


def test_hand_case_auroc_and_aupr():
    s = np.array([[0.9, 0.8], [0.3, 0.1]])
    y = np.array([[1, 0], [1, 0]])
    assert auroc(s, y) == pytest.approx(0.75)
    assert aupr(s, y) == pytest.approx(0.5 + 0.5 * 2 / 3)


def test_3x3_hand_case_matches_exhaustive_pairs():
    s = np.array([[0.5, 0.1, 0.5], [0.7, 0.2, 0.0], [0.5, 0.9, 0.3]])
    y = np.array([[1, 0, 0], [1, 1, 0], [0, 1, 0]])
    assert auroc(s, y) == pytest.approx(brute_auroc(s.ravel(), y.ravel()), abs=1e-15)


def test_perfect_and_tied_scores():
    y = np.eye(4, dtype=int)
    assert auroc(y * 2.0, y) == 1.0
    assert aupr(y * 2.0, y) == 1.0
    assert auroc(np.ones((4, 4)), y) == 0.5
    assert aupr(np.zeros((4, 4)), y) == pytest.approx(4 / 16)


def test_degenerate_truth_raises():
    with pytest.raises(UndefinedMetricError):
        auroc(np.random.rand(3, 3), np.ones((3, 3)))
    with pytest.raises(UndefinedMetricError):
        aupr(np.random.rand(3, 3), np.zeros((3, 3)))
    # identity truth has no positives once the diagonal is excluded
    with pytest.raises(UndefinedMetricError):
        auroc(np.random.rand(3, 3), np.eye(3), include_self=False)


def test_include_self_changes_pair_set():
    s = np.array([[0.0, 0.9], [0.8, 0.0]])
    y = np.array([[1, 1], [0, 1]])
    assert auroc(s, y, include_self=False) == 1.0
    assert auroc(s, y, include_self=True) == pytest.approx(brute_auroc(s.ravel(), y.ravel()))


@settings(max_examples=60, deadline=None)
@given(st.integers(0, 10_000), st.integers(2, 6))
def test_aupr_matches_threshold_sweep(seed, n):
    rng = np.random.default_rng(seed)
    s = rng.integers(0, 4, size=(n, n)).astype(float)  # plenty of ties
    y = rng.integers(0, 2, size=(n, n))
    if y.all() or not y.any():
        y[0, 0] = 1 - y[0, 0]
    assert aupr(s, y) == pytest.approx(brute_aupr(s.ravel(), y.ravel()), abs=1e-12)


@settings(max_examples=60, deadline=None)
@given(st.integers(0, 10_000))
def test_auroc_rank_invariant(seed):
    rng = np.random.default_rng(seed)
    s = rng.random((5, 5))
    y = (rng.random((5, 5)) < 0.4).astype(int)
    if y.all() or not y.any():
        y[0, 0] = 1 - y[0, 0]
    assert auroc(np.exp(3 * s) - 7, y) == pytest.approx(auroc(s, y), abs=1e-12)


def test_roc_curve_monotone_from_origin_to_corner():
    rng = np.random.default_rng(2)
    s = rng.random((6, 6))
    y = (rng.random((6, 6)) < 0.3).astype(int)
    fpr, tpr, _ = roc_curve(s, y)
    assert (fpr[0], tpr[0]) == (0.0, 0.0) and (fpr[-1], tpr[-1]) == (1.0, 1.0)
    assert np.all(np.diff(fpr) >= 0) and np.all(np.diff(tpr) >= 0)
    recall, precision, _ = pr_curve(s, y)
    assert np.all(np.diff(recall) >= 0) and recall[-1] == 1.0
    assert auroc(s, y) == pytest.approx(oracles.trapezoid_auc(fpr, tpr), abs=1e-15)
    assert auroc_pairs(s, y) == pytest.approx(brute_auroc(s.ravel(), y.ravel()), abs=1e-15)


def test_evaluate_report():
    s = np.array([[0.9, 0.0], [0.4, 0.2]])
    y = np.array([[1, 0], [1, 0]])
    m = evaluate(s, y, eps=0.3)
    assert m.auroc == 1.0 and m.aupr == 1.0
    assert m.confusion == {"tp": 2, "fp": 0, "fn": 0, "tn": 2}
    d = m.to_dict()
    assert d["adjacency"] == [[1, 0], [1, 0]]
    assert 0.0 <= d["auroc"] <= 1.0
