"""ROC, AUC and EER for genuine (positive) vs impostor (negative) scores.

A score is accepted as genuine when ``score >= threshold``.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np


class EmptyScoreList(ValueError):
    pass


@dataclass(frozen=True)
class ScoreSet:
    positives: np.ndarray
    negatives: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "positives", np.asarray(self.positives, dtype=float).ravel())
        object.__setattr__(self, "negatives", np.asarray(self.negatives, dtype=float).ravel())

    def check(self):
        if self.positives.size == 0 or self.negatives.size == 0:
            raise EmptyScoreList(
                f"need both score lists non-empty (got {self.positives.size} positive, "
                f"{self.negatives.size} negative)"
            )


@dataclass(frozen=True)
class RocCurve:
    """Operating points ordered by increasing threshold.

    The last point uses threshold ``inf`` (nothing accepted) so the curve
    always reaches FPR = TPR = 0.
    """

    thresholds: np.ndarray
    fpr: np.ndarray
    fnr: np.ndarray
    auc: float
    eer: float
    eer_threshold: float

    @property
    def tpr(self):
        return 1.0 - self.fnr

    def trapezoid_auc(self) -> float:
        # points run from (1, 1) down to (0, 0)
        x, y = self.fpr[::-1], self.tpr[::-1]
        return float(np.sum((x[1:] - x[:-1]) * (y[1:] + y[:-1]) / 2.0))

    def rows(self):
        return [
            (float(t), float(f), float(1.0 - n))
            for t, f, n in zip(self.thresholds, self.fpr, self.fnr)
        ]


def rank_auc(positives, negatives) -> float:
    """Probability that a random positive outranks a random negative, ties 1/2."""
    pos = np.asarray(positives, dtype=float)
    neg = np.sort(np.asarray(negatives, dtype=float))
    below = np.searchsorted(neg, pos, side="left")
    not_above = np.searchsorted(neg, pos, side="right")
    wins = below.sum() + 0.5 * (not_above - below).sum()
    return float(wins / (pos.size * neg.size))


def operating_points(positives, negatives, thresholds):
    pos = np.sort(positives)
    neg = np.sort(negatives)
    fnr = np.searchsorted(pos, thresholds, side="left") / pos.size
    fpr = 1.0 - np.searchsorted(neg, thresholds, side="left") / neg.size
    return fpr, fnr


def equal_error_rate(thresholds, fpr, fnr):
    """EER where FPR - FNR changes sign, linearly interpolated; returns (eer, threshold)."""
    d = fpr - fnr
    zero = np.nonzero(d == 0)[0]
    if len(zero):
        i = zero[0]
        return float(fpr[i]), float(thresholds[i])
    # d is non-increasing and starts >= 0 (at threshold 0 everything is accepted)
    i = int(np.nonzero(d > 0)[0][-1])
    j = i + 1
    w = d[i] / (d[i] - d[j])
    eer = fpr[i] + w * (fpr[j] - fpr[i])
    t_hi = thresholds[j] if np.isfinite(thresholds[j]) else thresholds[i]
    thr = thresholds[i] + w * (t_hi - thresholds[i])
    return float(eer), float(thr)


def compute_roc(scores: ScoreSet) -> RocCurve:
    scores.check()
    thresholds = np.unique(np.concatenate([scores.positives, scores.negatives, [0.0, 1.0]]))
    thresholds = np.append(thresholds, np.inf)
    fpr, fnr = operating_points(scores.positives, scores.negatives, thresholds)
    eer, eer_thr = equal_error_rate(thresholds, fpr, fnr)
    return RocCurve(
        thresholds=thresholds,
        fpr=fpr,
        fnr=fnr,
        auc=rank_auc(scores.positives, scores.negatives),
        eer=eer,
        eer_threshold=eer_thr,
    )


def rates_at(scores: ScoreSet, threshold: float = 0.5) -> dict[str, float]:
    """ACC (percent), FNR and FPR at a fixed decision threshold."""
    scores.check()
    fn = int(np.count_nonzero(scores.positives < threshold))
    fp = int(np.count_nonzero(scores.negatives >= threshold))
    n_pos, n_neg = scores.positives.size, scores.negatives.size
    return {
        "acc": 100.0 * (n_pos - fn + n_neg - fp) / (n_pos + n_neg),
        "fnr": fn / n_pos,
        "fpr": fp / n_neg,
    }
