"""Objective reconstruction metrics: log-STFT distance, log-Mel distance, SNR."""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from functools import lru_cache

import numpy as np
from scipy.signal import get_window

from .audio_io import AudioBuffer
from .errors import ConfigError, ShapeError, UndefinedReferenceError


@dataclass(frozen=True)
class MetricConfig:
    stft_window_sizes: tuple[int, ...] = field(default=(2048, 512, 128))
    mel_bins: int = 80
    mel_window: int = 1024
    hop_divisor: int = 4
    floor: float = 1e-5

    def __post_init__(self):
        object.__setattr__(self, "stft_window_sizes", tuple(int(w) for w in self.stft_window_sizes))
        for w in self.stft_window_sizes + (self.mel_window,):
            if w < 1 or w & (w - 1):
                raise ConfigError(f"window sizes must be powers of two, got {w}")
            if w // self.hop_divisor < 1:
                raise ConfigError(f"hop for window {w} would be zero")
        if self.mel_bins < 1 or not self.floor > 0:
            raise ConfigError("mel_bins must be positive and floor > 0")


def _pair(ref: AudioBuffer, est: AudioBuffer) -> tuple[np.ndarray, np.ndarray]:
    if ref.sample_rate != est.sample_rate:
        raise ShapeError(f"sample rates differ: {ref.sample_rate} vs {est.sample_rate}")
    if len(ref.samples) != len(est.samples):
        raise ShapeError(f"lengths differ: {len(ref.samples)} vs {len(est.samples)}")
    return ref.samples, est.samples


def stft_magnitude(x: np.ndarray, window: int, hop: int) -> np.ndarray:
    """|STFT| with a periodic Hann window, frames starting at 0, tail zero padded.

    Returns (frames, window // 2 + 1).
    """
    n = len(x)
    n_frames = 1 + -(-max(n - window, 0) // hop)
    padded = np.zeros((n_frames - 1) * hop + window)
    padded[:n] = x
    idx = np.arange(n_frames)[:, None] * hop + np.arange(window)[None, :]
    return np.abs(np.fft.rfft(padded[idx] * get_window("hann", window), axis=1))


def _hz_to_mel(f):
    return 2595.0 * np.log10(1.0 + np.asarray(f) / 700.0)


def _mel_to_hz(m):
    return 700.0 * (10.0 ** (np.asarray(m) / 2595.0) - 1.0)


@lru_cache(maxsize=16)
def mel_filterbank(sample_rate: int, n_fft: int, n_mels: int) -> np.ndarray:
    """Triangular HTK-scale filters from 0 Hz to Nyquist, shape (n_mels, n_fft // 2 + 1)."""
    freqs = np.arange(n_fft // 2 + 1) * sample_rate / n_fft
    edges = _mel_to_hz(np.linspace(0.0, _hz_to_mel(sample_rate / 2), n_mels + 2))
    lower, center, upper = edges[:-2, None], edges[1:-1, None], edges[2:, None]
    rising = (freqs[None, :] - lower) / (center - lower)
    falling = (upper - freqs[None, :]) / (upper - center)
    bank = np.maximum(0.0, np.minimum(rising, falling))
    bank.flags.writeable = False
    return bank


def stft_distance(ref: AudioBuffer, est: AudioBuffer, config: MetricConfig | None = None) -> float:
    """Mean over window sizes of the per-bin L1 distance between log magnitudes."""
    config = config or MetricConfig()
    a, b = _pair(ref, est)
    per_scale = []
    for w in config.stft_window_sizes:
        hop = w // config.hop_divisor
        la = np.log(stft_magnitude(a, w, hop) + config.floor)
        lb = np.log(stft_magnitude(b, w, hop) + config.floor)
        per_scale.append(np.mean(np.abs(la - lb)))
    return float(np.mean(per_scale))


def log_mel_spectrogram(x: np.ndarray, sample_rate: int, config: MetricConfig) -> np.ndarray:
    mag = stft_magnitude(x, config.mel_window, config.mel_window // config.hop_divisor)
    mel = mag @ mel_filterbank(sample_rate, config.mel_window, config.mel_bins).T
    return np.log(mel + config.floor)


def mel_distance(ref: AudioBuffer, est: AudioBuffer, config: MetricConfig | None = None) -> float:
    config = config or MetricConfig()
    a, b = _pair(ref, est)
    la = log_mel_spectrogram(a, ref.sample_rate, config)
    lb = log_mel_spectrogram(b, ref.sample_rate, config)
    return float(np.mean(np.abs(la - lb)))


def snr(ref: AudioBuffer, est: AudioBuffer) -> float:
    """Signal-to-noise ratio in dB; ``inf`` when the residual is exactly zero."""
    a, b = _pair(ref, est)
    signal = float(np.sum(a ** 2))
    if signal == 0:
        raise UndefinedReferenceError("reference signal is all zeros")
    noise = float(np.sum((a - b) ** 2))
    if noise == 0:
        return math.inf
    return 10.0 * math.log10(signal / noise)
