"""WAV input/output, peak normalization and slot padding.

Reading understands the RIFF container directly so malformed files and
unsupported encodings are reported as distinct errors. Writing always
produces 16-bit mono PCM.
"""

from __future__ import annotations

import struct
import wave
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .errors import AudioFormatError, AudioWriteError, EmptyInputError, UnsupportedCodecError

TARGET_SAMPLE_RATE = 24000

_WAVE_FORMAT_PCM = 0x0001
_WAVE_FORMAT_IEEE_FLOAT = 0x0003
_WAVE_FORMAT_EXTENSIBLE = 0xFFFE
_FORMAT_NAMES = {0x0002: "ADPCM", 0x0006: "A-law", 0x0007: "mu-law", 0x0011: "IMA ADPCM"}


@dataclass(frozen=True, eq=False)
class AudioBuffer:
    """Mono waveform. ``samples`` may carry zero padding past ``original_length``."""

    samples: np.ndarray
    sample_rate: int
    original_length: int = field(default=-1)

    def __post_init__(self):
        samples = np.array(self.samples, dtype=np.float64).reshape(-1)
        samples.flags.writeable = False
        object.__setattr__(self, "samples", samples)
        if self.original_length < 0:
            object.__setattr__(self, "original_length", len(samples))
        if self.sample_rate <= 0:
            raise ValueError(f"sample_rate must be positive, got {self.sample_rate}")
        if len(samples) < self.original_length:
            raise ValueError("samples shorter than original_length")

    def __len__(self):
        return len(self.samples)

    @property
    def duration(self) -> float:
        return self.original_length / self.sample_rate

    def trimmed(self) -> np.ndarray:
        return self.samples[: self.original_length]


def _parse_fmt(chunk: bytes):
    if len(chunk) < 16:
        raise AudioFormatError("fmt chunk shorter than 16 bytes")
    tag, channels, rate, _, block_align, bits = struct.unpack("<HHIIHH", chunk[:16])
    if tag == _WAVE_FORMAT_EXTENSIBLE:
        if len(chunk) < 26:
            raise AudioFormatError("truncated WAVE_FORMAT_EXTENSIBLE fmt chunk")
        # first two bytes of the subformat GUID carry the real format tag
        (tag,) = struct.unpack("<H", chunk[24:26])
    return tag, channels, rate, block_align, bits


def _decode_frames(data: bytes, tag: int, channels: int, bits: int) -> np.ndarray:
    if tag == _WAVE_FORMAT_PCM and bits == 16:
        x = np.frombuffer(data, dtype="<i2").astype(np.float64) / 32768.0
    elif tag == _WAVE_FORMAT_IEEE_FLOAT and bits == 32:
        x = np.frombuffer(data, dtype="<f4").astype(np.float64)
    else:
        name = _FORMAT_NAMES.get(tag, "PCM" if tag == _WAVE_FORMAT_PCM else f"format 0x{tag:04x}")
        raise UnsupportedCodecError(f"unsupported WAV encoding: {name}, {bits} bits")
    return x.reshape(-1, channels).mean(axis=1)


def load_wav(path) -> AudioBuffer:
    """Read a 16-bit PCM or 32-bit float WAV file, averaging channels to mono.

    Samples are scaled to float but not normalized.
    """
    raw = Path(path).read_bytes()
    if len(raw) < 12 or raw[:4] != b"RIFF" or raw[8:12] != b"WAVE":
        raise AudioFormatError(f"{path}: not a RIFF/WAVE file")

    fmt = None
    data = None
    pos = 12
    while pos + 8 <= len(raw):
        ck_id = raw[pos:pos + 4]
        (ck_size,) = struct.unpack("<I", raw[pos + 4:pos + 8])
        body = raw[pos + 8:pos + 8 + ck_size]
        if len(body) < ck_size:
            raise AudioFormatError(f"{path}: truncated {ck_id!r} chunk")
        if ck_id == b"fmt ":
            fmt = _parse_fmt(body)
        elif ck_id == b"data":
            data = body
        pos += 8 + ck_size + (ck_size & 1)
        if fmt is not None and data is not None:
            break
    if fmt is None or data is None:
        raise AudioFormatError(f"{path}: missing fmt or data chunk")

    tag, channels, rate, block_align, bits = fmt
    if channels < 1 or rate == 0 or block_align == 0:
        raise AudioFormatError(f"{path}: invalid fmt fields")
    if block_align != channels * bits // 8 or len(data) % block_align:
        raise AudioFormatError(f"{path}: data length inconsistent with block alignment")
    samples = _decode_frames(data, tag, channels, bits)
    return AudioBuffer(samples, rate, len(samples))


def normalize_peak(audio: AudioBuffer) -> AudioBuffer:
    if len(audio.samples) == 0:
        raise EmptyInputError("cannot normalize an empty buffer")
    peak = np.max(np.abs(audio.samples))
    if peak == 0:
        return audio
    return AudioBuffer(audio.samples / peak, audio.sample_rate, audio.original_length)


def pad_to_slot_multiple(audio: AudioBuffer, stride: int, slot_factor: int) -> AudioBuffer:
    """Zero-pad to the smallest multiple of ``stride * slot_factor`` covering the signal."""
    if stride <= 0 or slot_factor <= 0:
        raise ValueError("stride and slot_factor must be positive")
    slot = stride * slot_factor
    n = audio.original_length
    target = -(-n // slot) * slot
    out = np.zeros(target)
    out[:n] = audio.samples[:n]
    return AudioBuffer(out, audio.sample_rate, n)


def save_wav(audio: AudioBuffer, path) -> None:
    """Write the unpadded part of ``audio`` as 16-bit mono PCM, clamping to [-1, 1]."""
    x = np.clip(audio.trimmed(), -1.0, 1.0)
    pcm = np.clip(np.round(x * 32768.0), -32768, 32767).astype("<i2")
    try:
        # opening the file first keeps wave from leaving a half-built writer behind
        with open(path, "wb") as fh, wave.open(fh, "wb") as wf:
            wf.setnchannels(1)
            wf.setsampwidth(2)
            wf.setframerate(audio.sample_rate)
            wf.writeframes(pcm.tobytes())
    except OSError as exc:
        raise AudioWriteError(f"cannot write {path}: {exc}") from exc
