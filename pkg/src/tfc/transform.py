"""MDCT analysis/synthesis and latent pooling.

The MDCT plays the role of the learned encoder/decoder pair: frame ``t``
covers samples ``[(t - 1) * s, (t + 1) * s)`` of the input (with ``s``
zeros in front), so a padded signal of length ``T * s`` yields exactly
``T`` frames of ``s`` coefficients. The sine window satisfies the
Princen-Bradley condition and the orthonormal DCT-IV makes the transform
its own adjoint, so overlap-add reconstructs every sample except the last
stride.
"""

from __future__ import annotations

from dataclasses import dataclass
from enum import Enum

import numpy as np
from scipy.fft import dct

from .audio_io import TARGET_SAMPLE_RATE, AudioBuffer
from .errors import AlignmentError, SampleRateError, ShapeError

DEFAULT_STRIDE = 320
DEFAULT_WINDOW = 2 * DEFAULT_STRIDE


class Level(str, Enum):
    FINE = "fine"
    MEDIUM = "medium"
    COARSE = "coarse"

    @property
    def factor(self) -> int:
        return {Level.FINE: 1, Level.MEDIUM: 2, Level.COARSE: 4}[self]

    @property
    def code(self) -> int:
        return {Level.FINE: 0, Level.MEDIUM: 1, Level.COARSE: 2}[self]


@dataclass(frozen=True, eq=False)
class LatentSequence:
    frames: np.ndarray  # (T, D)
    frame_rate: float
    stride: int
    receptive_field: int

    def __post_init__(self):
        frames = np.asarray(self.frames, dtype=np.float64)
        if frames.ndim != 2:
            raise ShapeError(f"latent frames must be 2-D (T, D), got shape {frames.shape}")
        object.__setattr__(self, "frames", frames)
        if self.receptive_field < self.stride:
            raise ValueError("receptive_field must be at least the stride")

    @property
    def num_frames(self) -> int:
        return self.frames.shape[0]

    @property
    def dim(self) -> int:
        return self.frames.shape[1]


@dataclass(frozen=True)
class ResolutionSpec:
    level: Level
    stride: int
    receptive_field: int
    frame_rate: float


def resolution_specs(sample_rate: int = TARGET_SAMPLE_RATE, stride: int = DEFAULT_STRIDE,
                     window: int = DEFAULT_WINDOW) -> tuple[ResolutionSpec, ResolutionSpec, ResolutionSpec]:
    """Fine/medium/coarse strides and receptive fields (W, W+s, W+3s)."""
    rate = sample_rate / stride
    return (
        ResolutionSpec(Level.FINE, stride, window, rate),
        ResolutionSpec(Level.MEDIUM, 2 * stride, window + stride, rate / 2),
        ResolutionSpec(Level.COARSE, 4 * stride, window + 3 * stride, rate / 4),
    )


def sine_window(length: int) -> np.ndarray:
    n = np.arange(length)
    return np.sin(np.pi * (n + 0.5) / length)


def _fold(blocks: np.ndarray) -> np.ndarray:
    # (a, b, c, d) -> (-c_r - d, a - b_r) along the last axis
    a, b, c, d = np.split(blocks, 4, axis=-1)
    return np.concatenate([-c[..., ::-1] - d, a - b[..., ::-1]], axis=-1)


def _unfold(coeffs: np.ndarray) -> np.ndarray:
    u1, u2 = np.split(coeffs, 2, axis=-1)
    return np.concatenate([u2, -u2[..., ::-1], -u1[..., ::-1], -u1], axis=-1)


def mdct_frames(x: np.ndarray, stride: int = DEFAULT_STRIDE) -> np.ndarray:
    """MDCT of a stride-aligned signal; returns (len(x) // stride, stride)."""
    if stride % 2:
        raise ValueError("stride must be even")
    if len(x) % stride:
        raise AlignmentError(f"signal length {len(x)} is not a multiple of stride {stride}")
    n_frames = len(x) // stride
    ext = np.concatenate([np.zeros(stride), np.asarray(x, dtype=np.float64)])
    idx = np.arange(n_frames)[:, None] * stride + np.arange(2 * stride)[None, :]
    windowed = ext[idx] * sine_window(2 * stride)
    return dct(_fold(windowed), type=4, norm="ortho", axis=-1)


def imdct_frames(coeffs: np.ndarray) -> np.ndarray:
    """Inverse MDCT with windowed overlap-add; output length is T * stride."""
    n_frames, stride = coeffs.shape
    pieces = _unfold(dct(coeffs, type=4, norm="ortho", axis=-1)) * sine_window(2 * stride)
    out = np.zeros((n_frames + 1) * stride)
    # first halves and second halves each tile the output without overlap
    out[: n_frames * stride] += pieces[:, :stride].reshape(-1)
    out[stride:] += pieces[:, stride:].reshape(-1)
    return out[stride:]


def analyze(audio: AudioBuffer, stride: int = DEFAULT_STRIDE) -> LatentSequence:
    """Fine-rate latents (75 Hz at 24 kHz) of a padded buffer."""
    if audio.sample_rate != TARGET_SAMPLE_RATE:
        raise SampleRateError(f"expected {TARGET_SAMPLE_RATE} Hz audio, got {audio.sample_rate} Hz")
    if len(audio.samples) % (4 * stride):
        raise AlignmentError(f"audio length {len(audio.samples)} is not padded to {4 * stride} samples")
    frames = mdct_frames(audio.samples, stride)
    return LatentSequence(frames, audio.sample_rate / stride, stride, 2 * stride)


def synthesize(latents: LatentSequence, original_length: int | None = None,
               sample_rate: int = TARGET_SAMPLE_RATE) -> AudioBuffer:
    if latents.dim != latents.stride:
        raise ShapeError(f"expected {latents.stride}-dimensional frames, got {latents.dim}")
    samples = imdct_frames(latents.frames)
    if original_length is None:
        original_length = len(samples)
    return AudioBuffer(samples, sample_rate, original_length)


def pool_frames(frames: np.ndarray, factor: int) -> np.ndarray:
    """Average ``factor`` consecutive frames by repeated pairwise halving.

    Pooling by 4 is literally pooling by 2 twice, so the two routes agree
    bit for bit.
    """
    if factor not in (1, 2, 4):
        raise ValueError(f"pooling factor must be 1, 2 or 4, got {factor}")
    if len(frames) % factor:
        raise AlignmentError(f"{len(frames)} frames not divisible by {factor}")
    out = np.asarray(frames, dtype=np.float64)
    while factor > 1:
        out = (out[0::2] + out[1::2]) * 0.5
        factor //= 2
    return out


def downsample_latents(z: LatentSequence, factor: int) -> LatentSequence:
    if factor not in (2, 4):
        raise ValueError(f"factor must be 2 or 4, got {factor}")
    return LatentSequence(
        pool_frames(z.frames, factor),
        z.frame_rate / factor,
        z.stride * factor,
        z.receptive_field + (factor - 1) * z.stride,
    )
