import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from outlier_nmf.evaluation import LabelMismatch, auc, roc_curve, score_stats


def pair_count_auc(scores, labels):
    """Mann-Whitney statistic by explicit enumeration of positive/negative pairs."""
    pos = [s for s, y in zip(scores, labels) if y == 1]
    neg = [s for s, y in zip(scores, labels) if y == 0]
    wins = 0.0
    for p in pos:
        for q in neg:
            wins += 1.0 if p > q else 0.5 if p == q else 0.0
    return wins / (len(pos) * len(neg))


def test_perfect_and_reversed():
    assert auc([0.9, 0.1], [1, 0]) == 1.0
    assert auc([0.1, 0.9], [1, 0]) == 0.0


def test_worked_example():
    scores, labels = [4, 3, 2, 1], [1, 0, 1, 0]
    assert pair_count_auc(scores, labels) == 0.75
    assert auc(scores, labels) == pytest.approx(0.75, abs=1e-12)


def test_all_tied():
    assert auc([0.3, 0.3], [1, 0]) == 0.5


def test_curve_endpoints_and_monotone():
    c = roc_curve([5, 4, 4, 2, 1, 1], [1, 0, 1, 1, 0, 0])
    assert (c.fpr[0], c.tpr[0]) == (0.0, 0.0)
    assert (c.fpr[-1], c.tpr[-1]) == (100.0, 100.0)
    assert np.isinf(c.thresholds[0])
    assert np.all(np.diff(c.fpr) >= 0) and np.all(np.diff(c.tpr) >= 0)
    # tied scores enter together: one point per distinct score
    assert len(c.points()) == 1 + 4


def test_rates_follow_set_definitions():
    scores = np.array([0.9, 0.8, 0.7, 0.6, 0.5])
    labels = np.array([1, 0, 1, 0, 0])
    c = roc_curve(scores, labels)
    G = set(np.flatnonzero(labels))
    for t, fpr, tpr in c.points()[1:]:
        S = set(np.flatnonzero(scores >= t))
        assert tpr == pytest.approx(100 * len(S & G) / len(G))
        assert fpr == pytest.approx(100 * len(S - G) / (5 - len(G)))


def test_errors():
    with pytest.raises(ValueError):
        auc([1, 2], [1, 1])
    with pytest.raises(ValueError):
        auc([1, 2], [0, 0])
    with pytest.raises(LabelMismatch):
        auc([1, 2, 3], [0, 1])


@settings(max_examples=200, deadline=None)
@given(st.integers(0, 2**31 - 1))
def test_matches_pair_count_oracle(seed):
    rng = np.random.default_rng(seed)
    n = int(rng.integers(2, 16))
    labels = rng.integers(0, 2, n)
    labels[0], labels[1] = 0, 1
    # coarse values force ties
    scores = rng.integers(0, 5, n).astype(float) if seed % 2 else rng.normal(size=n)
    assert auc(scores, labels) == pytest.approx(pair_count_auc(scores, labels), abs=1e-12)


@settings(max_examples=50, deadline=None)
@given(st.integers(0, 2**31 - 1))
def test_invariant_under_increasing_transform(seed):
    rng = np.random.default_rng(seed)
    n = 12
    labels = np.r_[0, 1, rng.integers(0, 2, n - 2)]
    scores = rng.normal(size=n)
    a, b = roc_curve(scores, labels), roc_curve(np.exp(3 * scores) + 7, labels)
    np.testing.assert_array_equal(a.fpr, b.fpr)
    np.testing.assert_array_equal(a.tpr, b.tpr)
    assert a.auc == b.auc
    # with no ties the reversed ranking is complementary
    assert auc(scores, labels) + auc(-scores, labels) == pytest.approx(1.0, abs=1e-12)


def test_score_stats():
    s = score_stats([2, 2, 2, 2], [1, 0, 1, 0])
    assert s.gap == 0 and s.gap_ratio == 0
    s = score_stats([0, 0, 10, 10], [0, 0, 1, 1])
    assert s.gap == 10 and s.sd_outlier == 0 and s.sd_regular == 0
    assert s.gap_ratio == np.inf
    rng = np.random.default_rng(2)
    x, y = rng.normal(size=30), rng.integers(0, 2, 30)
    s = score_stats(x, y)
    assert s.mean_outlier == pytest.approx(np.mean(x[y == 1]))
    assert s.sd_regular == pytest.approx(np.std(x[y == 0]))
    pooled = np.sqrt((np.var(x[y == 1]) + np.var(x[y == 0])) / 2)
    assert s.gap_ratio == pytest.approx((s.mean_outlier - s.mean_regular) / pooled)
