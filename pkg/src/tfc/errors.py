"""Exception hierarchy shared by all codec modules."""


class TfcError(Exception):
    """Base class for every error raised by this package."""


class AudioFormatError(TfcError, ValueError):
    """Malformed or truncated RIFF/WAV data."""


class UnsupportedCodecError(AudioFormatError):
    """WAV encoding other than 16-bit PCM or 32-bit IEEE float."""


class EmptyInputError(TfcError, ValueError):
    pass


class ConfigError(TfcError, ValueError):
    pass


class SampleRateError(ConfigError):
    pass


class AlignmentError(TfcError, ValueError):
    """Length not divisible by the required stride or pooling factor."""


class ShapeError(TfcError, ValueError):
    pass


class TooShortError(TfcError, ValueError):
    pass


class InfeasibleTargetError(ConfigError):
    pass


class InvariantError(TfcError, ValueError):
    """Granularity masks that do not partition the timeline."""


class InsufficientDataError(TfcError, ValueError):
    pass


class CorruptCodeError(TfcError, ValueError):
    """Codeword index outside the codebook."""


class StreamFormatError(TfcError, ValueError):
    """Bad magic or truncated container."""


class UnsupportedVersionError(StreamFormatError):
    pass


class ChecksumError(TfcError, ValueError):
    pass


class StructuralError(TfcError, ValueError):
    """Container whose fields disagree with each other."""


class DegenerateInputError(TfcError, ValueError):
    pass


class UndefinedReferenceError(TfcError, ValueError):
    pass


class CodebookMismatchError(TfcError, ValueError):
    pass


class AudioWriteError(TfcError, OSError):
    pass
