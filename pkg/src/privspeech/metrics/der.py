"""Diarization error rate with forgiveness collar and optimal mapping."""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy.optimize import linear_sum_assignment

from ..errors import ConfigError, UndefinedMetricError
from .rttm import SegmentAnnotation

DEFAULT_COLLAR_S = 0.25


@dataclass
class DerBreakdown:
    fa_s: float
    miss_s: float
    error_s: float
    total_s: float
    mapping: dict[str, str] = field(default_factory=dict, repr=False)

    @property
    def der(self) -> float:
        if self.total_s <= 0:
            raise UndefinedMetricError("no scored reference speech")
        return (self.fa_s + self.miss_s + self.error_s) / self.total_s

    def __add__(self, other: "DerBreakdown") -> "DerBreakdown":
        return DerBreakdown(
            self.fa_s + other.fa_s,
            self.miss_s + other.miss_s,
            self.error_s + other.error_s,
            self.total_s + other.total_s,
        )


def merge_intervals(intervals):
    out = []
    for a, b in sorted(intervals):
        if out and a <= out[-1][1]:
            out[-1] = (out[-1][0], max(out[-1][1], b))
        else:
            out.append((a, b))
    return out


def collar_zones(reference: SegmentAnnotation, collar_s: float):
    """Merged no-score zones of +-collar around every reference boundary."""
    if collar_s <= 0:
        return []
    edges = {t for spans in reference.by_speaker().values() for span in spans for t in span}
    return merge_intervals((max(0.0, t - collar_s), t + collar_s) for t in edges)


def _active(spans_by_spk, t):
    return frozenset(s for s, spans in spans_by_spk.items() if any(a <= t < b for a, b in spans))


def scored_regions(reference, hypothesis, collar_s=DEFAULT_COLLAR_S, include_overlap=True):
    """Elementary regions ``(duration, ref_speakers, hyp_speakers)`` to score."""
    ref = reference.by_speaker()
    hyp = hypothesis.by_speaker()
    zones = collar_zones(reference, collar_s)
    cuts = {t for spans in (*ref.values(), *hyp.values()) for span in spans for t in span}
    cuts.update(t for zone in zones for t in zone)
    cuts = sorted(cuts)
    regions = []
    for t0, t1 in zip(cuts, cuts[1:]):
        mid = 0.5 * (t0 + t1)
        if any(a <= mid < b for a, b in zones):
            continue
        r, h = _active(ref, mid), _active(hyp, mid)
        if not r and not h:
            continue
        if not include_overlap and len(r) > 1:
            continue
        regions.append((t1 - t0, r, h))
    return regions


def optimal_mapping(regions) -> dict[str, str]:
    """Hypothesis -> reference label map maximising jointly-active time."""
    ref_spk = sorted({s for _, r, _ in regions for s in r})
    hyp_spk = sorted({s for _, _, h in regions for s in h})
    if not ref_spk or not hyp_spk:
        return {}
    overlap = np.zeros((len(ref_spk), len(hyp_spk)))
    ri = {s: i for i, s in enumerate(ref_spk)}
    hi = {s: i for i, s in enumerate(hyp_spk)}
    for dur, r, h in regions:
        for a in r:
            for b in h:
                overlap[ri[a], hi[b]] += dur
    rows, cols = linear_sum_assignment(overlap, maximize=True)
    return {hyp_spk[c]: ref_spk[r] for r, c in zip(rows, cols) if overlap[r, c] > 0}


def der(
    reference: SegmentAnnotation,
    hypothesis: SegmentAnnotation,
    collar_s: float = DEFAULT_COLLAR_S,
    include_overlap: bool = True,
) -> DerBreakdown:
    if collar_s < 0:
        raise ConfigError("collar must be non-negative")
    regions = scored_regions(reference, hypothesis, collar_s, include_overlap)
    mapping = optimal_mapping(regions)
    fa, miss, err, total = [], [], [], []
    for dur, r, h in regions:
        correct = sum(1 for s in h if mapping.get(s) in r)
        total.append(dur * len(r))
        miss.append(dur * max(0, len(r) - len(h)))
        fa.append(dur * max(0, len(h) - len(r)))
        err.append(dur * (min(len(r), len(h)) - correct))
    result = DerBreakdown(math.fsum(fa), math.fsum(miss), math.fsum(err), math.fsum(total), mapping)
    if result.total_s <= 0:
        raise UndefinedMetricError("reference has no speech left after collar removal")
    return result
