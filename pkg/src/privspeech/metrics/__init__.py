"""Scorers for WER, MCC, EER and DER."""

from .classification import ConfusionCounts, TrialScore, eer, mcc, operating_points, weighted_average
from .der import DEFAULT_COLLAR_S, DerBreakdown, der
from .rttm import Segment, SegmentAnnotation, parse_rttm, read_rttm, write_rttm
from .wer import WerBreakdown, align, tokenize, wer

__all__ = [
    "ConfusionCounts",
    "DEFAULT_COLLAR_S",
    "DerBreakdown",
    "Segment",
    "SegmentAnnotation",
    "TrialScore",
    "WerBreakdown",
    "align",
    "der",
    "eer",
    "mcc",
    "operating_points",
    "parse_rttm",
    "read_rttm",
    "tokenize",
    "weighted_average",
    "wer",
    "write_rttm",
]
