"""Meeting-style conversation simulator.

Utterances from a single-speaker pool are trimmed of leading/trailing
silence, a handful of speakers is assigned to a meeting, and their
utterances are laid out one after another (never overlapping) until every
participant has used up all of theirs. The next speaker is always the one
with the least accumulated speech so far, excluding whoever just spoke.

All times inside a plan are kept in integer samples so that the rendered
audio and the RTTM ground truth agree to the sample.
"""

from __future__ import annotations

import csv
import logging
from dataclasses import dataclass
from pathlib import Path
from typing import Callable

import numpy as np

from .errors import AllSilentError, ConfigError, PoolError, SampleRateError
from .metrics.rttm import Segment, SegmentAnnotation
from .signal_io import PIPELINE_RATE, AudioSignal, FrameConfig, frame_signal, read_wav, require_rate

log = logging.getLogger(__name__)

DEFAULT_THRESHOLD_DB = 40.0
DEFAULT_MIN_VOICED_MS = 100.0
DEFAULT_GAP_RANGE = (0.1, 2.0)
MEETING_SIZES = (3, 4)


# ---------------------------------------------------------------------------
# Trimming
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class TrimResult:
    start_sample: int
    end_sample: int
    n_input: int
    signal: AudioSignal

    @property
    def start_offset_s(self) -> float:
        return self.start_sample / self.signal.sample_rate

    @property
    def end_offset_s(self) -> float:
        return (self.n_input - self.end_sample) / self.signal.sample_rate


def _runs(mask: np.ndarray):
    """(start, stop) index pairs of consecutive True runs."""
    edges = np.diff(np.concatenate([[0], mask.astype(np.int8), [0]]))
    return list(zip(np.flatnonzero(edges == 1), np.flatnonzero(edges == -1)))


def trim_silence(
    signal: AudioSignal,
    threshold_db: float = DEFAULT_THRESHOLD_DB,
    min_voiced_ms: float = DEFAULT_MIN_VOICED_MS,
) -> TrimResult:
    """Cut leading and trailing low-energy audio.

    Frames (25 ms, 10 ms hop, rectangular) whose RMS is within
    ``threshold_db`` of the loudest frame count as voiced. Everything before
    the first and after the last voiced run spanning at least
    ``min_voiced_ms`` is dropped; the cut points are then refined to the
    first/last sample inside those boundary frames whose magnitude reaches
    the threshold.
    """
    cfg = FrameConfig(25.0, 10.0, "rect")
    x = signal.samples
    n = x.shape[0]
    win, hop = cfg.win_samples(signal.sample_rate), cfg.hop_samples(signal.sample_rate)
    padded = signal if n >= win else AudioSignal(np.pad(x, (0, win - n)), signal.sample_rate)
    frames = frame_signal(padded, cfg, pad_end=True).data
    rms = np.sqrt(np.mean(frames**2, axis=1))
    peak = rms.max()
    if peak <= 0.0:
        raise AllSilentError("signal is entirely silent")
    level = peak * 10.0 ** (-threshold_db / 20.0)
    voiced = rms >= level

    runs = _runs(voiced)
    long_runs = [(a, b) for a, b in runs if ((b - a - 1) * hop + win) * 1000.0 / signal.sample_rate >= min_voiced_ms]
    if not long_runs:
        log.debug("no voiced run of %.0f ms; keeping all voiced frames", min_voiced_ms)
        long_runs = runs
    first, last = long_runs[0][0], long_runs[-1][1] - 1

    lo = first * hop
    head = np.flatnonzero(np.abs(x[lo : min(lo + win, n)]) >= level)
    start = lo + int(head[0]) if head.size else lo
    hi = min(last * hop + win, n)
    tail = np.flatnonzero(np.abs(x[last * hop : hi]) >= level)
    end = last * hop + int(tail[-1]) + 1 if tail.size else hi
    if end <= start:
        raise AllSilentError("no samples left after trimming")
    return TrimResult(int(start), int(end), n, AudioSignal(x[start:end], signal.sample_rate))


# ---------------------------------------------------------------------------
# Pool and planning
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class PoolEntry:
    speaker_id: str
    utterance_id: str
    path: str
    n_samples: int
    trim_start: int = 0
    sample_rate: int = PIPELINE_RATE

    @property
    def duration_s(self) -> float:
        return self.n_samples / self.sample_rate


@dataclass
class UtterancePool:
    entries: list[PoolEntry]

    def __post_init__(self):
        seen = set()
        for e in self.entries:
            if e.n_samples <= 0:
                raise PoolError(f"utterance {e.utterance_id} has no samples")
            key = (e.speaker_id, e.utterance_id)
            if key in seen:
                raise PoolError(f"duplicate utterance {key}")
            seen.add(key)

    @property
    def speakers(self) -> list[str]:
        return sorted({e.speaker_id for e in self.entries})

    def by_speaker(self) -> dict[str, list[PoolEntry]]:
        out: dict[str, list[PoolEntry]] = {}
        for e in sorted(self.entries, key=lambda e: (e.speaker_id, e.utterance_id)):
            out.setdefault(e.speaker_id, []).append(e)
        return out

    def lookup(self, speaker_id: str, utterance_id: str) -> PoolEntry:
        for e in self.entries:
            if e.speaker_id == speaker_id and e.utterance_id == utterance_id:
                return e
        raise PoolError(f"utterance {speaker_id}/{utterance_id} not in pool")

    def subset(self, speakers) -> "UtterancePool":
        keep = set(speakers)
        return UtterancePool([e for e in self.entries if e.speaker_id in keep])


def load_pool(
    manifest,
    threshold_db: float = DEFAULT_THRESHOLD_DB,
    min_voiced_ms: float = DEFAULT_MIN_VOICED_MS,
    trim: bool = True,
) -> UtterancePool:
    """Read a ``speaker_id,utterance_id,path`` CSV and trim every utterance.

    Relative paths resolve against the manifest's directory. Silent
    utterances are logged and left out.
    """
    manifest = Path(manifest)
    entries = []
    with open(manifest, newline="") as fh:
        reader = csv.DictReader(fh)
        missing = {"speaker_id", "utterance_id", "path"} - set(reader.fieldnames or [])
        if missing:
            raise PoolError(f"{manifest}: missing column(s) {sorted(missing)}")
        for row in reader:
            path = Path(row["path"])
            if not path.is_absolute():
                path = manifest.parent / path
            signal = require_rate(read_wav(path))
            if trim:
                try:
                    t = trim_silence(signal, threshold_db, min_voiced_ms)
                except AllSilentError:
                    log.warning("skipping silent utterance %s", path)
                    continue
                start, n = t.start_sample, t.end_sample - t.start_sample
            else:
                start, n = 0, len(signal)
            entries.append(PoolEntry(row["speaker_id"], row["utterance_id"], str(path), n, start, signal.sample_rate))
    return UtterancePool(entries)


@dataclass(frozen=True)
class TimelineEntry:
    speaker_id: str
    utterance_id: str
    onset_sample: int
    n_samples: int
    sample_rate: int = PIPELINE_RATE

    @property
    def onset_s(self) -> float:
        return self.onset_sample / self.sample_rate

    @property
    def duration_s(self) -> float:
        return self.n_samples / self.sample_rate

    @property
    def end_sample(self) -> int:
        return self.onset_sample + self.n_samples


@dataclass
class MeetingPlan:
    meeting_id: str
    participants: list[str]
    timeline: list[TimelineEntry]
    trailing_gap_samples: int
    gap_range: tuple[float, float] = DEFAULT_GAP_RANGE
    sample_rate: int = PIPELINE_RATE

    @property
    def n_samples(self) -> int:
        end = self.timeline[-1].end_sample if self.timeline else 0
        return end + self.trailing_gap_samples

    def to_json(self, seed=None) -> dict:
        return {
            "meeting_id": self.meeting_id,
            "participants": list(self.participants),
            "seed": seed,
            "sample_rate": self.sample_rate,
            "n_samples": self.n_samples,
            "timeline": [
                {
                    "speaker_id": e.speaker_id,
                    "utterance_id": e.utterance_id,
                    "onset_s": e.onset_s,
                    "duration_s": e.duration_s,
                    "onset_sample": e.onset_sample,
                    "n_samples": e.n_samples,
                }
                for e in self.timeline
            ],
        }


def plan_meeting(
    pool: UtterancePool,
    n_speakers: int,
    rng: np.random.Generator,
    meeting_id: str = "meeting",
    gap_range: tuple[float, float] = DEFAULT_GAP_RANGE,
    sizes: tuple[int, ...] = MEETING_SIZES,
) -> MeetingPlan:
    """Draw participants and lay out their utterances without overlap."""
    if n_speakers not in sizes:
        raise ConfigError(f"meetings have {sizes} speakers, not {n_speakers}")
    gap_min, gap_max = gap_range
    if not 0 <= gap_min <= gap_max:
        raise ConfigError(f"invalid gap range {gap_range}")
    speakers = pool.speakers
    if len(speakers) < n_speakers:
        raise PoolError(f"pool has {len(speakers)} speakers, meeting needs {n_speakers}")
    rates = {e.sample_rate for e in pool.entries}
    if len(rates) != 1:
        raise SampleRateError(f"pool mixes sample rates {sorted(rates)}")
    rate = rates.pop()

    participants = [str(s) for s in rng.choice(speakers, size=n_speakers, replace=False)]
    by_spk = pool.by_speaker()
    remaining = {s: list(by_spk[s]) for s in participants}
    activity = dict.fromkeys(participants, 0)

    def gap() -> int:
        return int(round(rng.uniform(gap_min, gap_max) * rate))

    timeline: list[TimelineEntry] = []
    cursor = gap()
    previous = None
    while any(remaining.values()):
        candidates = [s for s in participants if remaining[s]]
        if previous in candidates and len(candidates) > 1:
            candidates.remove(previous)
        least = min(activity[s] for s in candidates)
        tied = [s for s in candidates if activity[s] == least]
        speaker = tied[int(rng.integers(len(tied)))] if len(tied) > 1 else tied[0]
        utt = remaining[speaker].pop(int(rng.integers(len(remaining[speaker]))))
        timeline.append(TimelineEntry(speaker, utt.utterance_id, cursor, utt.n_samples, rate))
        activity[speaker] += utt.n_samples
        cursor += utt.n_samples + gap()
        previous = speaker
    trailing = cursor - timeline[-1].end_sample
    return MeetingPlan(meeting_id, participants, timeline, trailing, tuple(gap_range), rate)


# ---------------------------------------------------------------------------
# Rendering
# ---------------------------------------------------------------------------


def _rms(x: np.ndarray) -> float:
    return float(np.sqrt(np.mean(x**2))) if x.size else 0.0


def render_meeting(
    plan: MeetingPlan,
    pool: UtterancePool,
    loader: Callable[[str], AudioSignal] = read_wav,
    normalize_gain_db: float | None = None,
) -> tuple[AudioSignal, SegmentAnnotation]:
    """Place each (trimmed) utterance at its onset; silence elsewhere.

    ``normalize_gain_db`` rescales every utterance to that RMS level in
    dBFS; by default utterances are copied sample for sample.
    """
    out = np.zeros(plan.n_samples)
    segments = []
    cache: dict[str, AudioSignal] = {}
    for item in plan.timeline:
        entry = pool.lookup(item.speaker_id, item.utterance_id)
        if entry.path not in cache:
            cache[entry.path] = loader(entry.path)
        signal = cache[entry.path]
        if signal.sample_rate != plan.sample_rate:
            raise SampleRateError(f"{entry.path} is {signal.sample_rate} Hz, meeting is {plan.sample_rate} Hz")
        chunk = signal.samples[entry.trim_start : entry.trim_start + entry.n_samples]
        if chunk.shape[0] != item.n_samples:
            raise PoolError(f"{entry.path} shorter than its pool entry")
        if normalize_gain_db is not None and _rms(chunk) > 0:
            chunk = chunk * (10.0 ** (normalize_gain_db / 20.0) / _rms(chunk))
        out[item.onset_sample : item.end_sample] = chunk
        segments.append(Segment(item.speaker_id, item.onset_s, item.end_sample / plan.sample_rate))
    peak = np.max(np.abs(out)) if out.size else 0.0
    if peak > 1.0:
        log.info("meeting %s clipped (peak %.3f), scaling down", plan.meeting_id, peak)
        out /= peak
    return AudioSignal(out, plan.sample_rate), SegmentAnnotation(segments, plan.meeting_id)


def assign_meetings(
    pool: UtterancePool,
    n_meetings: int,
    rng: np.random.Generator,
    sizes: tuple[int, ...] = MEETING_SIZES,
) -> list[list[str]]:
    """Split speakers into disjoint groups of 3-4, one per meeting."""
    free = list(pool.speakers)
    groups = []
    for k in range(n_meetings):
        size = int(rng.choice(sizes))
        if len(free) < size:
            fitting = [s for s in sizes if s <= len(free)]
            if not fitting:
                raise PoolError(f"only {len(free)} unassigned speakers left for meeting {k}")
            size = max(fitting)
        picked = [str(s) for s in rng.choice(free, size=size, replace=False)]
        groups.append(sorted(picked))
        free = [s for s in free if s not in picked]
    return groups


def meeting_overlaps(plan: MeetingPlan) -> bool:
    spans = sorted((e.onset_sample, e.end_sample) for e in plan.timeline)
    return any(b0 > a1 for (_, b0), (a1, _) in zip(spans, spans[1:]))
