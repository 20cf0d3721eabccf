import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy.optimize import linear_sum_assignment
from scipy.signal import lfilter

from audio_fixtures import RATE, speech_like
from privspeech.errors import ConfigError, DegenerateFrameError, SilentFrameError, SymmetryError
from privspeech.mcadams import (
    FilterState,
    LpcModel,
    McAdamsConfig,
    PoleSet,
    anonymize_frame,
    anonymize_signal,
    anonymize_utterance,
    find_poles,
    levinson_durbin,
    lpc_analyze,
    power_gain,
    rebuild_from_poles,
    shift_poles,
    stabilize,
    step_down,
)
from privspeech.signal_io import AudioSignal, make_window


def snr_db(ref, est):
    return 10 * np.log10(np.sum(ref**2) / np.sum((ref - est) ** 2))


def match_poles(z1, z2):
    cost = np.abs(z1[:, None] - z2[None, :])
    r, c = linear_sum_assignment(cost)
    return cost[r, c].max()


def random_pole_set(rng, max_order=20, min_sep=0.1):
    """Stable, conjugate-closed, well separated pole set."""
    while True:
        n_pairs = int(rng.integers(1, max_order // 2 + 1))
        n_real = int(rng.integers(0, max_order - 2 * n_pairs + 1))
        mags, angs = [], []
        for _ in range(n_pairs):
            r, a = rng.uniform(0.1, 0.95), rng.uniform(0.05, np.pi - 0.05)
            mags += [r, r]
            angs += [a, -a]
        for _ in range(n_real):
            mags.append(rng.uniform(0.05, 0.95))
            angs.append(0.0 if rng.random() < 0.5 else np.pi)
        ps = PoleSet(np.array(mags), np.array(angs))
        z = ps.poles
        gaps = np.abs(z[:, None] - z[None, :]) + 9 * np.eye(len(z))
        if gaps.min() >= min_sep:
            return ps


# ---------------------------------------------------------------------------
# LPC
# ---------------------------------------------------------------------------


@pytest.mark.parametrize("seed", range(5))
def test_ar2_recovery(seed):
    x = lfilter([1.0], [1.0, -1.5, 0.7], np.random.default_rng(seed).standard_normal(4000))
    model = lpc_analyze(x, 2)
    np.testing.assert_allclose(model.coefficients, [1.5, -0.7], atol=0.05)
    assert model.order == 2
    assert model.gain > 0


def test_levinson_solves_normal_equations():
    x = np.random.default_rng(3).standard_normal(800)
    order = 12
    r = np.array([np.dot(x[: len(x) - k], x[k:]) for k in range(order + 1)])
    a, _, err = levinson_durbin(r, order)
    toeplitz = np.array([[r[abs(i - j)] for j in range(order)] for i in range(order)])
    np.testing.assert_allclose(toeplitz @ a, r[1:], rtol=1e-10, atol=1e-10)
    assert math.isclose(err, r[0] - np.dot(a, r[1:]), rel_tol=1e-10)


def test_white_noise_small_reflections():
    x = np.random.default_rng(1).standard_normal(4000)
    model = lpc_analyze(x, 10)
    assert np.all(np.abs(model.reflection) < 0.1)


def test_constant_hann_frame_is_stable():
    model = lpc_analyze(make_window("hann", 400), 20)
    poles = find_poles(model)
    assert poles.magnitudes.max() < 1.0


def test_silent_and_degenerate_frames():
    with pytest.raises(SilentFrameError):
        lpc_analyze(np.zeros(400), 20)
    with pytest.raises(DegenerateFrameError):
        levinson_durbin(np.array([1.0, 1.0, 1.0]), 2)
    with pytest.raises(ConfigError):
        lpc_analyze(np.ones(10), 10)


def test_step_down_inverts_levinson():
    x = np.random.default_rng(9).standard_normal(1000)
    model = lpc_analyze(x * make_window("hann", 1000), 16)
    np.testing.assert_allclose(step_down(model.coefficients), model.reflection, atol=1e-10)


def test_power_gain_matches_impulse_response():
    a = np.array([1.2, -0.6, 0.1])
    h = lfilter([1.0], np.concatenate([[1.0], -a]), np.r_[1.0, np.zeros(5000)])
    assert math.isclose(power_gain(a), np.sum(h**2), rel_tol=1e-9)


# ---------------------------------------------------------------------------
# poles
# ---------------------------------------------------------------------------


def test_double_real_root():
    poles = find_poles(LpcModel(np.array([1.0, -0.25])))
    np.testing.assert_allclose(np.sort_complex(poles.poles), [0.5, 0.5], atol=1e-7)


def test_pure_imaginary_pair():
    r = 0.7
    poles = find_poles(LpcModel(np.array([0.0, -(r**2)])))
    np.testing.assert_allclose(sorted(poles.poles, key=lambda z: z.imag), [-0.7j, 0.7j], atol=1e-12)
    assert poles.magnitudes[0] == poles.magnitudes[1]


def test_find_poles_residuals_and_pairing():
    x = speech_like(0.5, seed=2)[2000:2400] * make_window("hann", 400)
    model = lpc_analyze(x, 20)
    poles = find_poles(model)
    assert len(poles) == 20
    z = poles.poles
    resid = np.abs(np.polyval(model.inverse_filter, z))
    assert resid.max() < 1e-6
    pos = [(m, a) for m, a in zip(poles.magnitudes, poles.angles) if 0 < a < np.pi]
    neg = [(m, -a) for m, a in zip(poles.magnitudes, poles.angles) if -np.pi < a < 0]
    assert sorted(pos) == sorted(neg)


def test_rebuild_examples():
    np.testing.assert_allclose(rebuild_from_poles(PoleSet(np.array([0.5, 0.5]), np.zeros(2))), [1.0, -0.25])
    assert rebuild_from_poles(PoleSet(np.zeros(0), np.zeros(0))).shape == (0,)


def test_rebuild_rejects_unpaired():
    with pytest.raises(SymmetryError):
        rebuild_from_poles(PoleSet(np.array([0.5, 0.5]), np.array([0.3, -0.2])))
    with pytest.raises(SymmetryError):
        PoleSet.from_complex([0.5 + 0.1j, 0.2])


@pytest.mark.parametrize("seed", range(20))
def test_coefficient_roundtrip(seed):
    x = speech_like(0.4, seed=seed)[1000:1400] * make_window("hann", 400)
    model = lpc_analyze(x, 20)
    np.testing.assert_allclose(rebuild_from_poles(find_poles(model)), model.coefficients, atol=1e-8)


def test_pole_roundtrip_random_sets():
    rng = np.random.default_rng(2024)
    for _ in range(200):
        ps = random_pole_set(rng)
        back = find_poles(LpcModel(rebuild_from_poles(ps)))
        assert match_poles(ps.poles, back.poles) < 1e-8


def test_shift_identity():
    ps = random_pole_set(np.random.default_rng(0))
    out = shift_poles(ps, 1.0)
    assert out.angles.tobytes() == ps.angles.tobytes()
    assert out.magnitudes.tobytes() == ps.magnitudes.tobytes()


def test_shift_example():
    out = shift_poles(PoleSet(np.array([0.9, 0.9]), np.array([0.5, -0.5])), 0.8)
    assert math.isclose(out.angles[0], 0.5743491774985174, abs_tol=1e-12)
    assert out.angles[1] == -out.angles[0]
    assert list(out.magnitudes) == [0.9, 0.9]


def test_real_poles_unchanged():
    ps = PoleSet(np.array([0.7, 0.4]), np.array([0.0, np.pi]))
    out = shift_poles(ps, 0.6)
    assert out.angles.tolist() == [0.0, np.pi]
    np.testing.assert_array_equal(out.poles, [0.7, -0.4])


def test_shift_clamps_angles():
    ps = PoleSet(np.array([0.9, 0.9]), np.array([3.0, -3.0]))
    out = shift_poles(ps, 1.5)
    assert out.angles[0] == np.pi - 1e-6


@settings(max_examples=200, deadline=None)
@given(
    st.floats(0.01, 0.99),
    st.floats(1e-3, np.pi - 1e-3),
    st.floats(0.3, 0.99),
)
def test_shift_properties(mag, phi, alpha):
    out = shift_poles(PoleSet(np.array([mag, mag]), np.array([phi, -phi])), alpha)
    assert out.magnitudes[0] == mag and out.magnitudes[1] == mag
    assert out.angles[1] == -out.angles[0]
    if phi < 1.0:
        assert out.angles[0] > phi or out.angles[0] == 1.0 - 1e-6
    elif phi > 1.0:
        assert out.angles[0] < phi


def test_shift_rejects_nonpositive_alpha():
    with pytest.raises(ConfigError):
        shift_poles(PoleSet(np.zeros(0), np.zeros(0)), 0.0)


def test_stabilize_scales_outside_poles():
    ps = PoleSet(np.array([1.2, 1.2, 0.5]), np.array([1.0, -1.0, 0.0]))
    out = stabilize(ps)
    assert math.isclose(out.magnitudes.max(), 0.999)
    np.testing.assert_allclose(out.magnitudes[2], 0.5 * 0.999 / 1.2)


# ---------------------------------------------------------------------------
# frames and utterances
# ---------------------------------------------------------------------------


def two_formant_noise(n, rng, formants=(500.0, 1500.0), r=0.97):
    a = np.array([1.0])
    for f in formants:
        theta = 2 * np.pi * f / RATE
        a = np.convolve(a, [1.0, -2 * r * np.cos(theta), r * r])
    return lfilter([1.0], a, rng.standard_normal(n))


def test_frame_identity_alpha_one():
    frame = speech_like(0.4, seed=4)[2000:2400] * make_window("hann", 400)
    out = anonymize_frame(frame, 20, 1.0)
    assert np.linalg.norm(out - frame) / np.linalg.norm(frame) < 1e-6


def test_zero_frame_passthrough():
    out = anonymize_frame(np.zeros(400), 20, 0.7)
    assert np.all(out == 0.0)


def test_state_updated_in_place():
    st_ = FilterState.zeros(4)
    frame = np.random.default_rng(0).standard_normal(50)
    out = anonymize_frame(frame, 4, 0.8, st_)
    np.testing.assert_array_equal(st_.inputs, frame[-4:])
    np.testing.assert_array_equal(st_.outputs, out[-4:])


def test_formant_peaks_move_to_shifted_angles():
    # peaks read on a 4096-point grid, compared in units of 1024-point bins
    rng = np.random.default_rng(5)
    n_fft, alpha = 1024, 0.8
    win = make_window("hann", 4096)
    acc = np.zeros(2049)
    for _ in range(50):
        out = anonymize_frame(two_formant_noise(4096, rng) * win, 4, alpha)
        acc += np.abs(np.fft.rfft(out)) ** 2
    split = 4 * 75
    got = [np.argmax(acc[:split]) / 4, (split + np.argmax(acc[split:800])) / 4]
    predicted = [(2 * np.pi * f / RATE) ** alpha / (2 * np.pi) * n_fft for f in (500.0, 1500.0)]
    for g, want in zip(got, predicted):
        assert abs(g - want) <= 2


def test_utterance_identity_snr():
    x = speech_like(3.0, seed=1)
    cfg = McAdamsConfig(alpha_range=(1.0, 1.0))
    out, alpha = anonymize_utterance(AudioSignal(x, RATE), cfg, np.random.default_rng(0))
    assert alpha == 1.0
    assert len(out) == len(x)
    assert snr_db(x, out.samples) > 40
    assert np.linalg.norm(out.samples - x) / np.linalg.norm(x) < 1e-4


def test_utterance_determinism():
    sig = AudioSignal(speech_like(1.0, seed=3), RATE)
    a, alpha_a = anonymize_utterance(sig, McAdamsConfig(), np.random.default_rng(42))
    b, alpha_b = anonymize_utterance(sig, McAdamsConfig(), np.random.default_rng(42))
    assert alpha_a == alpha_b
    assert 0.5 <= alpha_a < 0.9
    assert a.samples.tobytes() == b.samples.tobytes()


@pytest.mark.parametrize("seed", range(3))
def test_energy_preserved_within_3db(seed):
    x = speech_like(3.0, seed=seed)
    out, _ = anonymize_utterance(AudioSignal(x, RATE), McAdamsConfig(), np.random.default_rng(seed))
    ratio_db = 10 * np.log10(np.sum(out.samples**2) / np.sum(x**2))
    assert abs(ratio_db) <= 3.0


def test_output_actually_changes():
    x = speech_like(1.0, seed=6)
    y = anonymize_signal(AudioSignal(x, RATE), 0.7)
    assert snr_db(x, y.samples) < 10


def test_silence_stays_silent():
    out = anonymize_signal(AudioSignal(np.zeros(8000), RATE), 0.7)
    assert np.all(out.samples == 0.0)


def test_peak_normalised_when_clipping():
    x = 0.99 * np.sign(np.sin(2 * np.pi * 150 * np.arange(16000) / RATE))
    y = anonymize_signal(AudioSignal(x, RATE), 0.6, McAdamsConfig(match_gain=False))
    assert np.max(np.abs(y.samples)) <= 1.0


@pytest.mark.parametrize(
    "kw", [dict(alpha_range=(0.9, 0.5)), dict(alpha_range=(0.0, 0.5)), dict(lpc_order=1)]
)
def test_config_validation(kw):
    with pytest.raises(ConfigError):
        McAdamsConfig(**kw)


def test_order_must_fit_frame():
    with pytest.raises(ConfigError):
        McAdamsConfig(lpc_order=400).frame_samples(RATE)
