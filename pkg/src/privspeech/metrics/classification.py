"""MCC, EER and weighted averaging of per-set results."""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Iterable, Sequence

import numpy as np

from ..errors import ClassError, ConfigError


@dataclass(frozen=True)
class ConfusionCounts:
    tp: int = 0
    tn: int = 0
    fp: int = 0
    fn: int = 0

    @classmethod
    def from_labels(cls, ref: Sequence[int], hyp: Sequence[int]) -> "ConfusionCounts":
        ref = np.asarray(ref, dtype=bool)
        hyp = np.asarray(hyp, dtype=bool)
        if ref.shape != hyp.shape:
            raise ConfigError(f"label sequences differ in length: {ref.shape} vs {hyp.shape}")
        return cls(
            int(np.sum(ref & hyp)),
            int(np.sum(~ref & ~hyp)),
            int(np.sum(~ref & hyp)),
            int(np.sum(ref & ~hyp)),
        )

    def __add__(self, other):
        return ConfusionCounts(self.tp + other.tp, self.tn + other.tn, self.fp + other.fp, self.fn + other.fn)


def mcc(c: ConfusionCounts) -> float:
    """Matthews correlation coefficient; 0 when any marginal is empty."""
    factors = (c.tp + c.fp, c.tp + c.fn, c.tn + c.fp, c.tn + c.fn)
    if 0 in factors:
        return 0.0
    num = c.tp * c.tn - c.fp * c.fn
    return num / math.sqrt(math.prod(float(f) for f in factors))


@dataclass(frozen=True)
class TrialScore:
    is_target: bool
    score: float


def operating_points(target_scores, nontarget_scores):
    """(thresholds, far, frr) for accept-if-score >= threshold.

    The first point is threshold -inf (accept all), the last +inf (reject
    all); in between one point per unique score, ascending.
    """
    tar = np.sort(np.asarray(target_scores, dtype=np.float64))
    non = np.sort(np.asarray(nontarget_scores, dtype=np.float64))
    thr = np.unique(np.concatenate([tar, non]))
    far = (non.size - np.searchsorted(non, thr, side="left")) / non.size
    frr = np.searchsorted(tar, thr, side="left") / tar.size
    thr = np.concatenate([[-np.inf], thr, [np.inf]])
    far = np.concatenate([[1.0], far, [0.0]])
    frr = np.concatenate([[0.0], frr, [1.0]])
    return thr, far, frr


def eer(trials: Iterable[TrialScore]) -> tuple[float, float]:
    """Equal error rate and the threshold where it occurs.

    The rate is read off the ROC polyline: where FAR == FRR exactly at an
    operating point, that value; otherwise the crossing of the segment
    joining the two bracketing points.
    """
    trials = list(trials)
    tar = [t.score for t in trials if t.is_target]
    non = [t.score for t in trials if not t.is_target]
    if not tar or not non:
        raise ClassError("EER needs at least one target and one nontarget trial")
    if not np.all(np.isfinite(tar + non)):
        raise ConfigError("trial scores must be finite")
    thr, far, frr = operating_points(tar, non)
    diff = frr - far
    k = int(np.argmax(diff >= 0))
    if diff[k] == 0:
        return float(far[k]), float(thr[k])
    t = -diff[k - 1] / (diff[k] - diff[k - 1])
    rate = far[k - 1] + t * (far[k] - far[k - 1])
    lo, hi = thr[k - 1], thr[k]
    if np.isinf(lo):
        theta = hi
    elif np.isinf(hi):
        theta = lo
    else:
        theta = lo + t * (hi - lo)
    return float(rate), float(theta)


def weighted_average(values: Sequence[float], weights: Sequence[float]) -> float:
    if len(values) != len(weights):
        raise ConfigError(f"{len(values)} values but {len(weights)} weights")
    w = np.asarray(weights, dtype=np.float64)
    if np.any(w < 0) or w.sum() <= 0:
        raise ConfigError("weights must be non-negative with a positive sum")
    return float(np.dot(w, np.asarray(values, dtype=np.float64)) / w.sum())
