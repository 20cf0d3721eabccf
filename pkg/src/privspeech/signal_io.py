"""Audio ingestion, framing, tapering and power spectra.

Every downstream module (features, mcadams, simulator) goes through the
types defined here, so the conventions are fixed in one place:

* samples are float64 in [-1, 1], mono
* frames start at ``i * hop`` and are ``win`` samples long
* tapers are *periodic* (DFT-even), which makes Hann COLA at 50 % overlap
"""

from __future__ import annotations

import struct
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .errors import (
    ConfigError,
    FormatError,
    SampleRateError,
    TooShortError,
    UnsupportedEncodingError,
)

PIPELINE_RATE = 16000

_WAVE_FORMAT_PCM = 0x0001
_WAVE_FORMAT_IEEE_FLOAT = 0x0003
_WAVE_FORMAT_EXTENSIBLE = 0xFFFE


@dataclass(frozen=True)
class AudioSignal:
    samples: np.ndarray
    sample_rate: int

    def __post_init__(self):
        samples = np.asarray(self.samples, dtype=np.float64)
        if samples.ndim != 1:
            raise ConfigError("AudioSignal expects a 1-D (mono) sample array")
        if not np.all(np.isfinite(samples)):
            raise ConfigError("AudioSignal samples must be finite")
        if int(self.sample_rate) <= 0:
            raise ConfigError(f"sample rate must be positive, got {self.sample_rate}")
        object.__setattr__(self, "samples", samples)
        object.__setattr__(self, "sample_rate", int(self.sample_rate))

    def __len__(self):
        return self.samples.shape[0]

    @property
    def duration_s(self) -> float:
        return len(self) / self.sample_rate


def require_rate(signal: AudioSignal, rate: int = PIPELINE_RATE) -> AudioSignal:
    """Raise :class:`SampleRateError` unless ``signal`` is at ``rate`` Hz."""
    if signal.sample_rate != rate:
        raise SampleRateError(
            f"expected {rate} Hz input, got {signal.sample_rate} Hz (no resampling is done)"
        )
    return signal


# ---------------------------------------------------------------------------
# WAV I/O
# ---------------------------------------------------------------------------


def _iter_chunks(data: bytes):
    pos = 12
    while pos + 8 <= len(data):
        cid, size = struct.unpack_from("<4sI", data, pos)
        body = data[pos + 8 : pos + 8 + size]
        if len(body) < size:
            raise FormatError(f"truncated {cid!r} chunk: header says {size} bytes, {len(body)} present")
        yield cid, body
        pos += 8 + size + (size & 1)
    if 0 < len(data) - pos < 8:
        raise FormatError("truncated chunk header at end of file")


def read_wav(path) -> AudioSignal:
    """Read a RIFF/WAVE file and return a mono float signal.

    PCM (8/16/24/32-bit) and IEEE float (32/64-bit) are decoded. Multichannel
    audio is averaged to mono. The sample rate is taken from the header and
    is *not* checked here; call :func:`require_rate` at pipeline entry.
    """
    data = Path(path).read_bytes()
    if len(data) < 12 or data[:4] != b"RIFF" or data[8:12] != b"WAVE":
        raise FormatError(f"{path}: not a RIFF/WAVE file")

    fmt = None
    pcm = None
    for cid, body in _iter_chunks(data):
        if cid == b"fmt ":
            if len(body) < 16:
                raise FormatError(f"{path}: fmt chunk too short")
            fmt = struct.unpack_from("<HHIIHH", body, 0)
            if fmt[0] == _WAVE_FORMAT_EXTENSIBLE:
                if len(body) < 26:
                    raise FormatError(f"{path}: extensible fmt chunk too short")
                sub = struct.unpack_from("<H", body, 24)[0]
                fmt = (sub,) + fmt[1:]
        elif cid == b"data":
            pcm = body
    if fmt is None:
        raise FormatError(f"{path}: missing fmt chunk")
    if pcm is None:
        raise FormatError(f"{path}: missing data chunk")

    tag, channels, rate, _, block_align, bits = fmt
    if channels < 1 or rate < 1:
        raise FormatError(f"{path}: invalid channel count or sample rate")
    width = bits // 8
    if bits % 8 or block_align != width * channels:
        raise FormatError(f"{path}: inconsistent block alignment")
    n_frames = len(pcm) // block_align
    pcm = pcm[: n_frames * block_align]

    if tag == _WAVE_FORMAT_PCM:
        if bits == 8:
            x = (np.frombuffer(pcm, dtype=np.uint8).astype(np.float64) - 128.0) / 128.0
        elif bits == 16:
            x = np.frombuffer(pcm, dtype="<i2").astype(np.float64) / 32768.0
        elif bits == 24:
            raw = np.frombuffer(pcm, dtype=np.uint8).reshape(-1, 3).astype(np.int32)
            ints = raw[:, 0] | (raw[:, 1] << 8) | (raw[:, 2] << 16)
            ints = np.where(ints >= 1 << 23, ints - (1 << 24), ints)
            x = ints.astype(np.float64) / float(1 << 23)
        elif bits == 32:
            x = np.frombuffer(pcm, dtype="<i4").astype(np.float64) / float(1 << 31)
        else:
            raise UnsupportedEncodingError(f"{path}: {bits}-bit PCM not supported")
    elif tag == _WAVE_FORMAT_IEEE_FLOAT:
        if bits == 32:
            x = np.frombuffer(pcm, dtype="<f4").astype(np.float64)
        elif bits == 64:
            x = np.frombuffer(pcm, dtype="<f8").astype(np.float64)
        else:
            raise UnsupportedEncodingError(f"{path}: {bits}-bit float not supported")
    else:
        raise UnsupportedEncodingError(f"{path}: WAVE format tag 0x{tag:04x} not supported")

    x = x.reshape(-1, channels).mean(axis=1)
    if not np.all(np.isfinite(x)):
        raise FormatError(f"{path}: non-finite samples")
    return AudioSignal(np.clip(x, -1.0, 1.0), rate)


def write_wav(path, signal: AudioSignal) -> None:
    """Write ``signal`` as 16-bit little-endian mono PCM."""
    ints = np.clip(np.round(signal.samples * 32768.0), -32768, 32767).astype("<i2")
    payload = ints.tobytes()
    header = struct.pack(
        "<4sI4s4sIHHIIHH4sI",
        b"RIFF",
        36 + len(payload),
        b"WAVE",
        b"fmt ",
        16,
        _WAVE_FORMAT_PCM,
        1,
        signal.sample_rate,
        signal.sample_rate * 2,
        2,
        16,
        b"data",
        len(payload),
    )
    Path(path).write_bytes(header + payload)


# ---------------------------------------------------------------------------
# Framing
# ---------------------------------------------------------------------------

WINDOW_KINDS = ("hann", "hamming", "rect")


def make_window(kind: str, n: int) -> np.ndarray:
    """Periodic taper of length ``n``."""
    k = np.arange(n)
    if kind == "hann":
        return 0.5 - 0.5 * np.cos(2.0 * np.pi * k / n)
    if kind == "hamming":
        return 0.54 - 0.46 * np.cos(2.0 * np.pi * k / n)
    if kind == "rect":
        return np.ones(n)
    raise ConfigError(f"unknown window kind {kind!r}; choose from {WINDOW_KINDS}")


def _ms_to_samples(ms: float, rate: int, what: str) -> int:
    exact = ms * rate / 1000.0
    n = int(round(exact))
    if abs(exact - n) > 1e-9 or n <= 0:
        raise ConfigError(f"{what} of {ms} ms is not a positive whole number of samples at {rate} Hz")
    return n


@dataclass(frozen=True)
class FrameConfig:
    window_len_ms: float = 25.0
    hop_ms: float = 10.0
    window_kind: str = "hann"

    def __post_init__(self):
        if not 0 < self.hop_ms <= self.window_len_ms:
            raise ConfigError("need 0 < hop_ms <= window_len_ms")
        if self.window_kind not in WINDOW_KINDS:
            raise ConfigError(f"unknown window kind {self.window_kind!r}")

    def win_samples(self, rate: int) -> int:
        return _ms_to_samples(self.window_len_ms, rate, "window")

    def hop_samples(self, rate: int) -> int:
        return _ms_to_samples(self.hop_ms, rate, "hop")


@dataclass(frozen=True)
class Frames:
    """Windowed frames plus the timing needed to interpret them."""

    data: np.ndarray  # (T, win)
    sample_rate: int
    hop: int
    window: np.ndarray = field(repr=False)

    def __len__(self):
        return self.data.shape[0]

    @property
    def win(self) -> int:
        return self.data.shape[1]


def frame_count(n_samples: int, win: int, hop: int) -> int:
    return (n_samples - win) // hop + 1


def frame_signal(signal: AudioSignal, cfg: FrameConfig, pad_end: bool = False) -> Frames:
    """Cut ``signal`` into tapered frames.

    Frame ``i`` covers samples ``[i*hop, i*hop + win)``; there are
    ``floor((N - win)/hop) + 1`` full frames. With ``pad_end`` one extra
    zero-padded frame is appended when samples remain past the last full
    frame.
    """
    rate = signal.sample_rate
    win = cfg.win_samples(rate)
    hop = cfg.hop_samples(rate)
    x = signal.samples
    n = x.shape[0]
    if n < win:
        raise TooShortError(f"signal has {n} samples, window needs {win}")
    t = frame_count(n, win, hop)
    if pad_end and (t - 1) * hop + win < n:
        t += 1
        x = np.concatenate([x, np.zeros((t - 1) * hop + win - n)])
    idx = np.arange(t)[:, None] * hop + np.arange(win)[None, :]
    window = make_window(cfg.window_kind, win)
    return Frames(x[idx] * window, rate, hop, window)


def overlap_add(frames: np.ndarray, hop: int, length: int | None = None) -> np.ndarray:
    """Sum frames back onto a time axis at spacing ``hop``."""
    t, win = frames.shape
    out = np.zeros((t - 1) * hop + win if t else 0)
    for i in range(t):
        out[i * hop : i * hop + win] += frames[i]
    if length is not None:
        out = out[:length] if out.shape[0] >= length else np.pad(out, (0, length - out.shape[0]))
    return out


# ---------------------------------------------------------------------------
# Power spectra
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class Spectrogram:
    frames: np.ndarray  # (T, n_fft // 2 + 1), power
    frame_hop_s: float
    bin_hz: float
    n_fft: int

    def __post_init__(self):
        f = np.asarray(self.frames, dtype=np.float64)
        if f.ndim != 2 or f.shape[1] != self.n_fft // 2 + 1:
            raise ConfigError(f"spectrogram must have n_fft/2+1 = {self.n_fft // 2 + 1} columns")
        object.__setattr__(self, "frames", f)

    @property
    def sample_rate(self) -> float:
        return self.bin_hz * self.n_fft

    def __len__(self):
        return self.frames.shape[0]

    def with_frames(self, frames: np.ndarray, frame_hop_s: float | None = None) -> "Spectrogram":
        hop = self.frame_hop_s if frame_hop_s is None else frame_hop_s
        return Spectrogram(frames, hop, self.bin_hz, self.n_fft)


def next_pow2(n: int) -> int:
    return 1 << max(0, int(n - 1).bit_length())


def power_spectrum(frames: Frames, n_fft: int | None = None) -> Spectrogram:
    """|DFT|^2 of each frame zero-padded to ``n_fft``; bins 0..n_fft/2 kept.

    ``n_fft`` defaults to the next power of two above the frame length
    (512 for 25 ms at 16 kHz).
    """
    if n_fft is None:
        n_fft = next_pow2(frames.win)
    if n_fft < frames.win:
        raise ConfigError(f"n_fft={n_fft} shorter than frame length {frames.win}")
    if n_fft & (n_fft - 1):
        raise ConfigError(f"n_fft={n_fft} is not a power of two")
    spec = np.fft.rfft(frames.data, n=n_fft, axis=1)
    power = spec.real**2 + spec.imag**2
    return Spectrogram(power, frames.hop / frames.sample_rate, frames.sample_rate / n_fft, n_fft)
