"""ROC curves, AUC and per-class score summaries for outlier rankings."""

from dataclasses import dataclass

import numpy as np


class LabelMismatch(ValueError):
    pass


@dataclass(frozen=True)
class RocCurve:
    """ROC points with rates in percent; ``thresholds[0]`` is ``+inf``."""

    thresholds: np.ndarray
    fpr: np.ndarray
    tpr: np.ndarray
    auc: float

    def points(self):
        return list(zip(self.thresholds.tolist(), self.fpr.tolist(), self.tpr.tolist()))


def _check(scores, labels):
    scores = np.asarray(scores, dtype=np.float64).ravel()
    labels = np.asarray(labels).ravel()
    if scores.shape != labels.shape:
        raise LabelMismatch(f"{scores.size} scores but {labels.size} labels")
    if not np.all(np.isin(labels, (0, 1))):
        raise ValueError("labels must be 0 or 1")
    if np.isnan(scores).any():
        raise ValueError("scores contain NaN")
    labels = labels.astype(bool)
    n_pos = int(labels.sum())
    if n_pos == 0 or n_pos == labels.size:
        raise ValueError("need at least one positive and one negative label")
    return scores, labels, n_pos, labels.size - n_pos


def roc_curve(scores, labels):
    """ROC curve of a ranking where a higher score means more outlying.

    The set of reported outliers at threshold ``t`` is every document with
    ``score >= t``; thresholds run over the distinct scores in descending
    order, so tied documents enter together.
    """
    scores, labels, n_pos, n_neg = _check(scores, labels)
    order = np.argsort(-scores, kind="mergesort")
    s, y = scores[order], labels[order]
    # last index of every run of equal scores
    ends = np.flatnonzero(np.r_[s[1:] != s[:-1], True])
    tp = np.cumsum(y)[ends]
    fp = (ends + 1) - tp
    thresholds = np.r_[np.inf, s[ends]]
    tpr = np.r_[0.0, 100.0 * tp / n_pos]
    fpr = np.r_[0.0, 100.0 * fp / n_neg]
    area = np.sum(np.diff(fpr) * (tpr[1:] + tpr[:-1]) / 2.0) / 1e4
    return RocCurve(thresholds, fpr, tpr, float(area))


def auc(scores, labels):
    """Area under the ROC curve, in [0, 1]."""
    return roc_curve(scores, labels).auc


@dataclass(frozen=True)
class ScoreStats:
    mean_outlier: float
    sd_outlier: float
    mean_regular: float
    sd_regular: float
    gap: float
    gap_ratio: float


def score_stats(scores, labels):
    """Per-class mean and (population) standard deviation of the scores.

    ``gap`` is outlier mean minus regular mean; ``gap_ratio`` divides it by
    the root-mean-square of the two class standard deviations (``inf`` when
    both are zero and the gap is not, ``0`` when the gap is zero).
    """
    scores = np.asarray(scores, dtype=np.float64).ravel()
    labels = np.asarray(labels).ravel().astype(bool)
    if scores.shape != labels.shape:
        raise LabelMismatch(f"{scores.size} scores but {labels.size} labels")
    pos, neg = scores[labels], scores[~labels]

    def _ms(x):
        return (float(x.mean()), float(x.std())) if x.size else (float("nan"), float("nan"))

    mp, sdp = _ms(pos)
    mn, sdn = _ms(neg)
    gap = mp - mn
    pooled = np.sqrt((sdp ** 2 + sdn ** 2) / 2.0)
    if gap == 0:
        ratio = 0.0
    elif pooled > 0:
        ratio = gap / pooled
    else:
        ratio = float(np.copysign(np.inf, gap))
    return ScoreStats(mp, sdp, mn, sdn, gap, float(ratio))


def write_roc_csv(curve, path):
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write("threshold,fpr,tpr\n")
        for t, f, p in curve.points():
            fh.write(f"{t:.10g},{f:.10g},{p:.10g}\n")
