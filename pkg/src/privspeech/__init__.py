"""Privacy-preserving speech features, McAdams anonymization, meeting
simulation and evaluation scorers."""

from .features import (
    FeatureMatrix,
    MelFilterbank,
    OlmegaConfig,
    build_mel_filterbank,
    log_mel,
    olmega_features,
    repeat_upsample,
    smooth_psd,
    standard_features,
    subsample_frames,
)
from .mcadams import (
    LpcModel,
    McAdamsConfig,
    PoleSet,
    anonymize_frame,
    anonymize_signal,
    anonymize_utterance,
    find_poles,
    lpc_analyze,
    rebuild_from_poles,
    shift_poles,
)
from .signal_io import AudioSignal, FrameConfig, Spectrogram, frame_signal, power_spectrum, read_wav, write_wav

__version__ = "0.1.0"
