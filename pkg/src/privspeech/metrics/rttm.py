"""Speaker segment annotations and RTTM I/O."""

from __future__ import annotations

from collections import defaultdict
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, NamedTuple

from ..errors import ConfigError, ParseError


class Segment(NamedTuple):
    speaker: str
    start: float
    end: float

    @property
    def duration(self) -> float:
        return self.end - self.start


@dataclass
class SegmentAnnotation:
    segments: list[Segment] = field(default_factory=list)
    file_id: str = "file"

    def __post_init__(self):
        self.segments = [Segment(str(s), float(a), float(b)) for s, a, b in self.segments]
        for seg in self.segments:
            if seg.start < 0 or seg.end <= seg.start:
                raise ConfigError(f"invalid segment {seg}")

    @property
    def speakers(self) -> list[str]:
        return sorted({s.speaker for s in self.segments})

    def by_speaker(self) -> dict[str, list[tuple[float, float]]]:
        """Per-speaker segments with same-speaker overlaps merged."""
        out: dict[str, list[tuple[float, float]]] = defaultdict(list)
        for seg in sorted(self.segments, key=lambda s: (s.speaker, s.start, s.end)):
            spans = out[seg.speaker]
            if spans and seg.start <= spans[-1][1]:
                spans[-1] = (spans[-1][0], max(spans[-1][1], seg.end))
            else:
                spans.append((seg.start, seg.end))
        return dict(out)

    def relabel(self, mapping: dict[str, str]) -> "SegmentAnnotation":
        return SegmentAnnotation([Segment(mapping.get(s, s), a, b) for s, a, b in self.segments], self.file_id)


def _parse_time(token: str, what: str, line_no: int) -> float:
    try:
        return float(token)
    except ValueError:
        raise ParseError(f"bad {what} {token!r}", line_no) from None


def parse_rttm(lines: Iterable[str]) -> dict[str, SegmentAnnotation]:
    annotations: dict[str, SegmentAnnotation] = {}
    for line_no, raw in enumerate(lines, start=1):
        line = raw.strip()
        if not line or line.startswith(";;") or line.startswith("#"):
            continue
        fields = line.split()
        if fields[0] != "SPEAKER":
            continue
        if len(fields) < 8:
            raise ParseError(f"expected at least 8 fields, got {len(fields)}", line_no)
        file_id, onset, dur, label = fields[1], fields[3], fields[4], fields[7]
        onset = _parse_time(onset, "onset", line_no)
        dur = _parse_time(dur, "duration", line_no)
        if dur <= 0:
            raise ParseError(f"non-positive duration {dur}", line_no)
        if onset < 0:
            raise ParseError(f"negative onset {onset}", line_no)
        ann = annotations.setdefault(file_id, SegmentAnnotation([], file_id))
        ann.segments.append(Segment(label, onset, onset + dur))
    return annotations


def read_rttm(path) -> dict[str, SegmentAnnotation]:
    """Read SPEAKER lines, grouped by file id. Other line types are skipped."""
    with open(path) as fh:
        return parse_rttm(fh)


def format_rttm(annotation: SegmentAnnotation) -> list[str]:
    return [
        f"SPEAKER {annotation.file_id} 1 {seg.start:.3f} {seg.duration:.3f} <NA> <NA> {seg.speaker} <NA> <NA>"
        for seg in sorted(annotation.segments, key=lambda s: (s.start, s.end, s.speaker))
    ]


def write_rttm(annotations, path) -> None:
    if isinstance(annotations, SegmentAnnotation):
        annotations = [annotations]
    lines = [line for ann in annotations for line in format_rttm(ann)]
    Path(path).write_text("".join(line + "\n" for line in lines))
