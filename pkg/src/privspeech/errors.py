"""Exception hierarchy shared by all privspeech modules."""


class PrivSpeechError(Exception):
    """Base class for every error raised by this package."""


class ConfigError(PrivSpeechError, ValueError):
    """Invalid parameter or configuration value."""


class FormatError(PrivSpeechError, ValueError):
    """Malformed file contents (bad RIFF header, truncated chunk, ...)."""


class UnsupportedEncodingError(FormatError):
    """Well-formed file using an encoding we do not decode."""


class SampleRateError(PrivSpeechError, ValueError):
    """Signal sample rate differs from the one a pipeline requires."""


class TooShortError(PrivSpeechError, ValueError):
    """Signal shorter than one analysis window."""


class ShapeError(PrivSpeechError, ValueError):
    """Array dimensions do not agree."""


class ResolutionError(ConfigError):
    """Mel filterbank too fine for the FFT grid."""


class FramePassthrough(PrivSpeechError):
    """A frame cannot be processed and must be passed through unchanged."""


class SilentFrameError(FramePassthrough):
    """All-zero frame."""


class DegenerateFrameError(FramePassthrough):
    """Levinson-Durbin produced a reflection coefficient with |k| >= 1."""


class NumericError(FramePassthrough):
    """Root finding failed to reach the required residual."""


class SymmetryError(PrivSpeechError, ValueError):
    """Pole set is not closed under complex conjugation."""


class UndefinedMetricError(PrivSpeechError, ValueError):
    """Metric denominator is zero (empty reference, no scored speech)."""


class ClassError(PrivSpeechError, ValueError):
    """Trial list lacks target or nontarget trials."""


class ParseError(PrivSpeechError, ValueError):
    """Malformed line in a text annotation file."""

    def __init__(self, message, line_no=None):
        if line_no is not None:
            message = f"line {line_no}: {message}"
        super().__init__(message)
        self.line_no = line_no


class AllSilentError(PrivSpeechError, ValueError):
    """Utterance has no frame above the energy threshold."""


class PoolError(PrivSpeechError, ValueError):
    """Utterance pool cannot satisfy a meeting request."""
