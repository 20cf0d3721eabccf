"""Log Mel filterbank features, standard and olMEGA.

The olMEGA variant smooths the power spectrum over time with a one-pole
recursive filter, keeps every ``factor``-th frame, repeats each kept frame
``factor`` times to restore the frame rate, and only then applies the Mel
filterbank. The result carries the coarse spectral envelope at a 125 ms
time resolution while staying frame-aligned with a 12.5 ms hop.
"""

from __future__ import annotations

import csv
import math
import struct
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .errors import ConfigError, FormatError, ResolutionError, ShapeError
from .signal_io import (
    AudioSignal,
    FrameConfig,
    Spectrogram,
    frame_signal,
    power_spectrum,
    require_rate,
)

LOG_FLOOR = 1e-10
DEFAULT_N_FFT = 512
VARIANTS = ("standard", "olmega")


def hz_to_mel(f):
    return 2595.0 * np.log10(1.0 + np.asarray(f, dtype=np.float64) / 700.0)


def mel_to_hz(m):
    return 700.0 * (10.0 ** (np.asarray(m, dtype=np.float64) / 2595.0) - 1.0)


@dataclass(frozen=True)
class MelFilterbank:
    weights: np.ndarray  # (n_mels, n_fft // 2 + 1)
    centers_hz: np.ndarray
    fmin_hz: float
    fmax_hz: float
    n_fft: int
    sample_rate: int

    @property
    def n_mels(self) -> int:
        return self.weights.shape[0]


def build_mel_filterbank(
    n_mels: int,
    n_fft: int = DEFAULT_N_FFT,
    sample_rate: int = 16000,
    fmin_hz: float = 0.0,
    fmax_hz: float | None = None,
) -> MelFilterbank:
    """Triangular filters with centers equally spaced on the Mel scale.

    Filter ``i`` rises from Mel point ``i`` to point ``i+1`` and falls to
    point ``i+2``; there are ``n_mels + 2`` points spanning
    ``[mel(fmin), mel(fmax)]``. Weights are peak-normalised to 1.
    """
    if fmax_hz is None:
        fmax_hz = sample_rate / 2.0
    if n_mels < 1:
        raise ConfigError("n_mels must be >= 1")
    if not 0.0 <= fmin_hz < fmax_hz <= sample_rate / 2.0:
        raise ConfigError(f"need 0 <= fmin < fmax <= {sample_rate / 2}")

    points_hz = mel_to_hz(np.linspace(hz_to_mel(fmin_hz), hz_to_mel(fmax_hz), n_mels + 2))
    bins_hz = np.arange(n_fft // 2 + 1) * (sample_rate / n_fft)

    left, center, right = points_hz[:-2, None], points_hz[1:-1, None], points_hz[2:, None]
    rising = (bins_hz[None, :] - left) / (center - left)
    falling = (right - bins_hz[None, :]) / (right - center)
    weights = np.maximum(0.0, np.minimum(rising, falling))

    empty = np.flatnonzero(weights.max(axis=1) <= 0.0)
    if empty.size:
        raise ResolutionError(
            f"{n_mels} Mel filters are too narrow for n_fft={n_fft}: "
            f"filter(s) {empty.tolist()} cover no FFT bin"
        )
    return MelFilterbank(weights, points_hz[1:-1].copy(), float(fmin_hz), float(fmax_hz), n_fft, sample_rate)


@dataclass(frozen=True)
class FeatureMatrix:
    rows: np.ndarray  # (T, n_mels)
    frame_hop_s: float
    variant: str = "standard"

    def __post_init__(self):
        if self.variant not in VARIANTS:
            raise ConfigError(f"unknown feature variant {self.variant!r}")

    @property
    def shape(self):
        return self.rows.shape


def log_mel(
    spec: Spectrogram, fb: MelFilterbank, floor: float = LOG_FLOOR, variant: str = "standard"
) -> FeatureMatrix:
    if floor <= 0:
        raise ConfigError("log floor must be positive")
    if spec.frames.shape[1] != fb.weights.shape[1]:
        raise ShapeError(
            f"filterbank expects {fb.weights.shape[1]} bins, spectrogram has {spec.frames.shape[1]}"
        )
    if spec.n_fft != fb.n_fft or not math.isclose(spec.sample_rate, fb.sample_rate):
        raise ShapeError("filterbank built for a different n_fft / sample rate")
    energies = spec.frames @ fb.weights.T
    return FeatureMatrix(np.log(np.maximum(energies, floor)), spec.frame_hop_s, variant)


# ---------------------------------------------------------------------------
# olMEGA pipeline
# ---------------------------------------------------------------------------


def smoothing_coefficient(hop_s: float, tau_s: float) -> float:
    return math.exp(-hop_s / tau_s)


def smooth_psd(spec: Spectrogram, tau_ms: float, zero_init: bool = False) -> Spectrogram:
    """First-order recursive smoothing of each frequency bin over time.

    ``y[t] = a*y[t-1] + (1-a)*x[t]`` with ``a = exp(-hop/tau)``. The state
    starts at ``y[0] = x[0]``; ``zero_init`` starts from ``y[-1] = 0``
    instead (impulse-response checks only).
    """
    if tau_ms <= 0:
        raise ConfigError("tau_ms must be positive")
    if spec.frame_hop_s <= 0:
        raise ConfigError("spectrogram frame hop must be positive")
    a = smoothing_coefficient(spec.frame_hop_s, tau_ms / 1000.0)
    x = spec.frames
    y = np.empty_like(x)
    if len(x) == 0:
        return spec.with_frames(y)
    if zero_init:
        state, start = np.zeros(x.shape[1]), 0
    else:
        state, start = x[0], 1
        y[0] = x[0]
    for t in range(start, x.shape[0]):
        state = a * state + (1.0 - a) * x[t]
        y[t] = state
    return spec.with_frames(y)


def _check_factor(factor) -> int:
    if int(factor) != factor or factor < 1:
        raise ConfigError(f"factor must be a positive integer, got {factor}")
    return int(factor)


def subsample_frames(spec: Spectrogram, factor: int) -> Spectrogram:
    factor = _check_factor(factor)
    return spec.with_frames(spec.frames[::factor], spec.frame_hop_s * factor)


def repeat_upsample(spec: Spectrogram, factor: int) -> Spectrogram:
    factor = _check_factor(factor)
    return spec.with_frames(np.repeat(spec.frames, factor, axis=0), spec.frame_hop_s / factor)


@dataclass(frozen=True)
class OlmegaConfig:
    window_len_ms: float = 25.0
    hop_ms: float = 12.5
    tau_ms: float = 125.0

    def __post_init__(self):
        if not self.tau_ms > self.hop_ms > 0:
            raise ConfigError("need tau_ms > hop_ms > 0")
        ratio = self.tau_ms / self.hop_ms
        if abs(ratio - round(ratio)) > 1e-9:
            raise ConfigError(f"tau_ms / hop_ms = {ratio} is not an integer")

    @property
    def subsample_factor(self) -> int:
        return int(round(self.tau_ms / self.hop_ms))

    @property
    def frame_config(self) -> FrameConfig:
        return FrameConfig(self.window_len_ms, self.hop_ms, "hann")


def _spectrogram(signal: AudioSignal, frame_cfg: FrameConfig, fb: MelFilterbank) -> Spectrogram:
    require_rate(signal)
    if fb.sample_rate != signal.sample_rate:
        raise ShapeError("filterbank built for a different sample rate")
    return power_spectrum(frame_signal(signal, frame_cfg), fb.n_fft)


def standard_features(
    signal: AudioSignal, fb: MelFilterbank, frame_cfg: FrameConfig = FrameConfig()
) -> FeatureMatrix:
    """Plain log Mel energies (25 ms Hann window, 10 ms hop by default)."""
    return log_mel(_spectrogram(signal, frame_cfg, fb), fb)


def olmega_features(
    signal: AudioSignal, cfg: OlmegaConfig = OlmegaConfig(), fb: MelFilterbank | None = None
) -> FeatureMatrix:
    """frame -> PSD -> smooth -> subsample -> repeat -> log Mel."""
    if fb is None:
        fb = build_mel_filterbank(80, DEFAULT_N_FFT, signal.sample_rate)
    spec = _spectrogram(signal, cfg.frame_config, fb)
    spec = smooth_psd(spec, cfg.tau_ms)
    spec = subsample_frames(spec, cfg.subsample_factor)
    spec = repeat_upsample(spec, cfg.subsample_factor)
    return log_mel(spec, fb, variant="olmega")


def extract(signal: AudioSignal, variant: str, n_mels: int) -> FeatureMatrix:
    fb = build_mel_filterbank(n_mels, DEFAULT_N_FFT, signal.sample_rate)
    if variant == "standard":
        return standard_features(signal, fb)
    if variant == "olmega":
        return olmega_features(signal, OlmegaConfig(), fb)
    raise ConfigError(f"unknown feature variant {variant!r}")


# ---------------------------------------------------------------------------
# Feature files
#
# CSV:    "# variant=<v> hop_s=<h> n_mels=<m>" comment line, a header row
#         mel_0..mel_{m-1}, then one row per frame.
# Binary: 16-byte header = magic b"PSFEAT\x00\x00", uint16 version,
#         uint16 variant code, uint32 hop in microseconds; then uint64 rows,
#         uint64 cols, then rows*cols float32. Everything little-endian.
# ---------------------------------------------------------------------------

BIN_MAGIC = b"PSFEAT\x00\x00"
BIN_VERSION = 1
_HEADER = struct.Struct("<8sHHI")
_DIMS = struct.Struct("<QQ")


def write_features_csv(path, feats: FeatureMatrix) -> None:
    with open(path, "w", newline="") as fh:
        fh.write(f"# variant={feats.variant} hop_s={feats.frame_hop_s!r} n_mels={feats.rows.shape[1]}\n")
        writer = csv.writer(fh)
        writer.writerow([f"mel_{i}" for i in range(feats.rows.shape[1])])
        for row in feats.rows:
            writer.writerow([repr(float(v)) for v in row])


def read_features_csv(path) -> FeatureMatrix:
    with open(path, newline="") as fh:
        meta_line = fh.readline()
        if not meta_line.startswith("#"):
            raise FormatError(f"{path}: missing metadata comment line")
        meta = dict(tok.split("=", 1) for tok in meta_line[1:].split())
        reader = csv.reader(fh)
        header = next(reader)
        rows = [[float(v) for v in r] for r in reader if r]
    n_mels = int(meta["n_mels"])
    if len(header) != n_mels:
        raise FormatError(f"{path}: header has {len(header)} columns, metadata says {n_mels}")
    data = np.array(rows, dtype=np.float64).reshape(-1, n_mels)
    return FeatureMatrix(data, float(meta["hop_s"]), meta["variant"])


def write_features_bin(path, feats: FeatureMatrix) -> None:
    rows, cols = feats.rows.shape
    hop_us = int(round(feats.frame_hop_s * 1e6))
    with open(path, "wb") as fh:
        fh.write(_HEADER.pack(BIN_MAGIC, BIN_VERSION, VARIANTS.index(feats.variant), hop_us))
        fh.write(_DIMS.pack(rows, cols))
        fh.write(np.ascontiguousarray(feats.rows, dtype="<f4").tobytes())


def read_features_bin(path) -> FeatureMatrix:
    blob = Path(path).read_bytes()
    if len(blob) < _HEADER.size + _DIMS.size:
        raise FormatError(f"{path}: file too short for feature header")
    magic, version, variant, hop_us = _HEADER.unpack_from(blob, 0)
    if magic != BIN_MAGIC:
        raise FormatError(f"{path}: bad magic {magic!r}")
    if version != BIN_VERSION:
        raise FormatError(f"{path}: unsupported version {version}")
    if variant >= len(VARIANTS):
        raise FormatError(f"{path}: unknown variant code {variant}")
    rows, cols = _DIMS.unpack_from(blob, _HEADER.size)
    payload = blob[_HEADER.size + _DIMS.size :]
    if len(payload) != rows * cols * 4:
        raise FormatError(f"{path}: expected {rows * cols * 4} data bytes, found {len(payload)}")
    data = np.frombuffer(payload, dtype="<f4").astype(np.float64).reshape(rows, cols)
    return FeatureMatrix(data, hop_us / 1e6, VARIANTS[variant])
