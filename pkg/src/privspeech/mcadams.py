"""McAdams-coefficient speaker anonymization.

Each 25 ms frame is LPC-analysed, the angles of the complex LPC poles are
raised to the power ``alpha`` (magnitudes untouched), and the LPC residual
of the original frame is re-synthesised through the shifted all-pole
filter. Frames are Hann-windowed at 50 % overlap, so plain overlap-add of
the outputs reconstructs the signal when ``alpha == 1``.

Filter memory is carried between frames that abut in time. With hop =
win/2 the even frames tile the signal without overlap, as do the odd
frames, so each of those two "channels" is filtered as a continuous
stream. That keeps the inverse/synthesis pair an exact identity at
``alpha == 1`` and lets the resonances of one frame ring into the next.
"""

from __future__ import annotations

import logging
from collections import Counter
from dataclasses import dataclass, field

import numpy as np
from scipy.signal import lfilter, lfiltic

from .errors import (
    ConfigError,
    DegenerateFrameError,
    FramePassthrough,
    NumericError,
    SilentFrameError,
    SymmetryError,
)
from .signal_io import AudioSignal, make_window, require_rate

log = logging.getLogger(__name__)

ANGLE_EPS = 1e-6
STABILITY_MARGIN = 0.999
ROOT_RESIDUAL_TOL = 1e-6


@dataclass(frozen=True)
class McAdamsConfig:
    alpha_range: tuple[float, float] = (0.5, 0.9)
    lpc_order: int = 20
    frame_len_ms: float = 25.0
    frame_hop_ms: float = 12.5
    seed: int = 0
    match_gain: bool = True

    def __post_init__(self):
        low, high = self.alpha_range
        # low == high is the fixed-alpha mode
        if not 0 < low <= high:
            raise ConfigError(f"alpha_range must satisfy 0 < low <= high, got {self.alpha_range}")
        if self.lpc_order < 2:
            raise ConfigError("lpc_order must be >= 2")
        if self.frame_hop_ms <= 0 or self.frame_hop_ms > self.frame_len_ms:
            raise ConfigError("need 0 < frame_hop_ms <= frame_len_ms")

    def frame_samples(self, rate: int) -> tuple[int, int]:
        win = int(round(self.frame_len_ms * rate / 1000.0))
        hop = int(round(self.frame_hop_ms * rate / 1000.0))
        if self.lpc_order >= win:
            raise ConfigError(f"lpc_order {self.lpc_order} must be below frame length {win}")
        if win % hop:
            raise ConfigError("frame length must be a whole multiple of the hop")
        return win, hop

    def draw_alpha(self, rng: np.random.Generator) -> float:
        low, high = self.alpha_range
        if low == high:
            return float(low)
        return float(rng.uniform(low, high))


# ---------------------------------------------------------------------------
# LPC analysis
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class LpcModel:
    """All-pole model with A(z) = 1 - sum_k a_k z^-k."""

    coefficients: np.ndarray
    gain: float = 1.0
    reflection: np.ndarray | None = field(default=None, repr=False)

    @property
    def order(self) -> int:
        return self.coefficients.shape[0]

    @property
    def inverse_filter(self) -> np.ndarray:
        """Coefficients of A(z) in ascending powers of z^-1."""
        return np.concatenate([[1.0], -self.coefficients])


def autocorrelation(frame: np.ndarray, max_lag: int) -> np.ndarray:
    n = frame.shape[0]
    return np.array([np.dot(frame[: n - k], frame[k:]) for k in range(max_lag + 1)])


def levinson_durbin(r: np.ndarray, order: int):
    """Solve the Toeplitz normal equations for the predictor.

    Returns ``(a, k, err)``: predictor coefficients a_1..a_p, reflection
    coefficients k_1..k_p and the final prediction-error energy.
    """
    if r[0] <= 0.0:
        raise SilentFrameError("zero-energy frame")
    a = np.zeros(order)
    k = np.zeros(order)
    err = r[0]
    for i in range(order):
        acc = r[i + 1] - np.dot(a[:i], r[i:0:-1])
        ki = acc / err
        if not np.isfinite(ki) or abs(ki) >= 1.0:
            raise DegenerateFrameError(f"reflection coefficient {ki} at stage {i + 1}")
        prev = a[:i].copy()
        a[:i] = prev - ki * prev[::-1]
        a[i] = ki
        k[i] = ki
        err *= 1.0 - ki * ki
    return a, k, err


def lpc_analyze(frame: np.ndarray, order: int) -> LpcModel:
    frame = np.asarray(frame, dtype=np.float64)
    if frame.shape[0] <= order:
        raise ConfigError(f"frame of {frame.shape[0]} samples too short for order {order}")
    if not np.any(frame):
        raise SilentFrameError("all-zero frame")
    a, k, err = levinson_durbin(autocorrelation(frame, order), order)
    return LpcModel(a, float(np.sqrt(max(err, 0.0))), k)


# ---------------------------------------------------------------------------
# Poles
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class PoleSet:
    """Poles in polar form.

    Complex poles are stored as adjacent (r, +phi), (r, -phi) entries with
    bit-identical magnitudes. Real poles have angle 0 or pi.
    """

    magnitudes: np.ndarray
    angles: np.ndarray

    def __len__(self):
        return self.magnitudes.shape[0]

    @property
    def poles(self) -> np.ndarray:
        z = self.magnitudes * np.exp(1j * self.angles)
        real = (self.angles == 0.0) | (np.abs(self.angles) == np.pi)
        z[real] = self.magnitudes[real] * np.where(self.angles[real] == 0.0, 1.0, -1.0)
        return z

    @classmethod
    def from_complex(cls, poles) -> "PoleSet":
        """Build from complex values, pairing upper/lower half-plane roots."""
        z = np.asarray(poles, dtype=np.complex128)
        upper = sorted(z[z.imag > 0], key=lambda p: (p.real, p.imag))
        lower = [np.conj(p) for p in z[z.imag < 0]]
        if len(upper) != len(lower):
            raise SymmetryError("poles are not closed under conjugation")
        mags, angs = [], []
        for u in upper:
            j = int(np.argmin([abs(u - c) for c in lower]))
            merged = 0.5 * (u + lower.pop(j))
            r, phi = abs(merged), float(np.angle(merged))
            mags += [r, r]
            angs += [phi, -phi]
        for p in z[z.imag == 0]:
            mags.append(abs(p.real))
            angs.append(0.0 if p.real >= 0 else np.pi)
        return cls(np.array(mags, dtype=np.float64), np.array(angs, dtype=np.float64))


def _check_conjugate_closed(poles: PoleSet) -> None:
    upper = Counter((m, a) for m, a in zip(poles.magnitudes, poles.angles) if 0 < a < np.pi)
    lower = Counter((m, -a) for m, a in zip(poles.magnitudes, poles.angles) if -np.pi < a < 0)
    if upper != lower:
        raise SymmetryError("pole set is not closed under complex conjugation")


def find_poles(model: LpcModel) -> PoleSet:
    """Roots of z^p - a_1 z^(p-1) - ... - a_p (companion-matrix eigenvalues)."""
    poly = model.inverse_filter
    if model.order == 0:
        return PoleSet(np.zeros(0), np.zeros(0))
    try:
        roots = np.roots(poly)
    except np.linalg.LinAlgError as exc:
        raise NumericError(f"root finding failed: {exc}") from exc
    if roots.shape[0] != model.order or not np.all(np.isfinite(roots)):
        raise NumericError("root finder returned the wrong number of finite roots")
    poles = PoleSet.from_complex(roots)
    z = poles.poles
    # backward error: |p(z)| relative to sum |c_k| |z|^k
    powers = np.abs(z)[:, None] ** np.arange(model.order, -1, -1)[None, :]
    scale = powers @ np.abs(poly)
    num = np.abs(np.polyval(poly, z))
    resid = np.divide(num, scale, out=np.zeros_like(num), where=scale > 0)
    if np.any(resid > ROOT_RESIDUAL_TOL):
        raise NumericError(f"root residual {resid.max():.3g} above {ROOT_RESIDUAL_TOL}")
    return poles


def shift_poles(poles: PoleSet, alpha: float) -> PoleSet:
    """Raise each complex pole's angle to the power ``alpha``.

    Magnitudes are copied unchanged; real poles are left alone. Shifted
    angles are kept within [ANGLE_EPS, pi - ANGLE_EPS].
    """
    if alpha <= 0:
        raise ConfigError("alpha must be positive")
    angles = poles.angles.copy()
    if alpha != 1.0:
        complex_ = (angles != 0.0) & (np.abs(angles) != np.pi)
        phi = np.abs(angles[complex_])
        shifted = phi**alpha
        clipped = np.clip(shifted, ANGLE_EPS, np.pi - ANGLE_EPS)
        if np.any(clipped != shifted):
            log.debug("clamped %d shifted pole angle(s)", int(np.sum(clipped != shifted)))
        angles[complex_] = np.sign(angles[complex_]) * clipped
    return PoleSet(poles.magnitudes.copy(), angles)


def rebuild_from_poles(poles: PoleSet) -> np.ndarray:
    """Expand prod (z - p_i) and return predictor coefficients a_1..a_p.

    Conjugate pairs are multiplied out as real quadratics
    z^2 - 2 r cos(phi) z + r^2, so the result is real by construction.
    """
    _check_conjugate_closed(poles)
    poly = np.array([1.0])
    for m, a in zip(poles.magnitudes, poles.angles):
        if a == 0.0:
            poly = np.convolve(poly, [1.0, -m])
        elif abs(a) == np.pi:
            poly = np.convolve(poly, [1.0, m])
        elif a > 0:
            poly = np.convolve(poly, [1.0, -2.0 * m * np.cos(a), m * m])
    return -poly[1:]


def step_down(coefficients: np.ndarray) -> np.ndarray:
    """Reflection coefficients of a predictor (inverse Levinson recursion)."""
    a = np.asarray(coefficients, dtype=np.float64).copy()
    p = a.shape[0]
    k = np.zeros(p)
    for i in range(p, 0, -1):
        ki = a[i - 1]
        k[i - 1] = ki
        if abs(ki) >= 1.0:
            raise DegenerateFrameError(f"reflection coefficient {ki} in step-down")
        prev = a[: i - 1]
        a[: i - 1] = (prev + ki * prev[::-1]) / (1.0 - ki * ki)
    return k


def power_gain(coefficients: np.ndarray) -> float:
    """Sum of squares of the impulse response of 1/A(z)."""
    k = step_down(coefficients)
    return float(1.0 / np.prod(1.0 - k * k))


def stabilize(poles: PoleSet) -> PoleSet:
    peak = poles.magnitudes.max() if len(poles) else 0.0
    if peak < 1.0:
        return poles
    log.warning("unstable shifted filter (max |p| = %.6f); scaling poles", peak)
    return PoleSet(poles.magnitudes * (STABILITY_MARGIN / peak), poles.angles.copy())


# ---------------------------------------------------------------------------
# Frame and utterance processing
# ---------------------------------------------------------------------------


@dataclass
class FilterState:
    """Last ``order`` input and output samples of one OLA channel."""

    inputs: np.ndarray
    outputs: np.ndarray

    @classmethod
    def zeros(cls, order: int) -> "FilterState":
        return cls(np.zeros(order), np.zeros(order))

    def update(self, frame: np.ndarray, out: np.ndarray) -> None:
        p = self.inputs.shape[0]
        self.inputs = np.concatenate([self.inputs, frame])[-p:]
        self.outputs = np.concatenate([self.outputs, out])[-p:]


def shifted_coefficients(frame: np.ndarray, order: int, alpha: float) -> tuple[LpcModel, np.ndarray]:
    model = lpc_analyze(frame, order)
    poles = stabilize(shift_poles(find_poles(model), alpha))
    return model, rebuild_from_poles(poles)


def anonymize_frame(
    frame: np.ndarray,
    order: int,
    alpha: float,
    state: FilterState | None = None,
    match_gain: bool = False,
) -> np.ndarray:
    """Re-synthesise one windowed frame through pole-shifted LPC.

    ``state`` carries filter memory from the previous abutting frame and is
    updated in place. Silent or numerically degenerate frames come back
    unchanged. With ``match_gain`` the residual is rescaled so the shifted
    synthesis filter has the same power gain as the original one.
    """
    frame = np.asarray(frame, dtype=np.float64)
    if state is None:
        state = FilterState.zeros(order)
    try:
        model, new_a = shifted_coefficients(frame, order, alpha)
    except FramePassthrough as exc:
        log.debug("frame passed through: %s", exc)
        out = frame.copy()
    else:
        analysis = model.inverse_filter
        zi = lfiltic(analysis, [1.0], y=np.zeros(order), x=state.inputs[::-1])
        residual, _ = lfilter(analysis, [1.0], frame, zi=zi)
        if match_gain:
            try:
                residual = residual * np.sqrt(power_gain(model.coefficients) / power_gain(new_a))
            except DegenerateFrameError as exc:
                log.debug("gain matching skipped: %s", exc)
        synthesis = np.concatenate([[1.0], -new_a])
        zi = lfiltic([1.0], synthesis, y=state.outputs[::-1])
        out, _ = lfilter([1.0], synthesis, residual, zi=zi)
    state.update(frame, out)
    return out


def anonymize_signal(signal: AudioSignal, alpha: float, cfg: McAdamsConfig = McAdamsConfig()) -> AudioSignal:
    """Apply one McAdams coefficient to a whole signal."""
    require_rate(signal)
    win, hop = cfg.frame_samples(signal.sample_rate)
    window = make_window("hann", win)
    n_channels = win // hop
    ola_gain = window.sum() / hop

    x = signal.samples
    n = x.shape[0]
    lead = win - hop
    n_frames = -(-(n + lead) // hop)
    padded = np.zeros((n_frames - 1) * hop + win)
    padded[lead : lead + n] = x

    states = [FilterState.zeros(cfg.lpc_order) for _ in range(n_channels)]
    out = np.zeros_like(padded)
    for i in range(n_frames):
        start = i * hop
        frame = padded[start : start + win] * window
        out[start : start + win] += anonymize_frame(
            frame, cfg.lpc_order, alpha, states[i % n_channels], cfg.match_gain
        )
    y = out[lead : lead + n] / ola_gain

    peak = np.max(np.abs(y)) if n else 0.0
    if peak > 1.0:
        log.info("output peak %.3f > 1, peak-normalising", peak)
        y = y / peak
    return AudioSignal(y, signal.sample_rate)


def anonymize_utterance(
    signal: AudioSignal,
    cfg: McAdamsConfig = McAdamsConfig(),
    rng: np.random.Generator | None = None,
) -> tuple[AudioSignal, float]:
    """Draw one alpha from ``cfg.alpha_range`` and anonymize ``signal`` with it."""
    if rng is None:
        rng = np.random.default_rng(cfg.seed)
    alpha = cfg.draw_alpha(rng)
    return anonymize_signal(signal, alpha, cfg), alpha
