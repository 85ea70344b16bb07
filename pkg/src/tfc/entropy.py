"""Temporal entropy of waveform segments via Gaussian bin affinities.

Each sample is spread over ``N`` uniformly spaced amplitude bins with a
Gaussian kernel; the per-segment average of those affinities, normalized,
is treated as a distribution whose Shannon entropy (nats) measures how
much the segment's amplitude varies.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from functools import reduce

import numpy as np

from .audio_io import AudioBuffer
from .errors import AlignmentError, ConfigError, EmptyInputError, ShapeError, TooShortError
from .transform import ResolutionSpec, resolution_specs

# Affinities are accumulated as integers in units of 2**-40: window sums
# are then exact and independent of summation order.
_FIXED_SCALE = float(2 ** 40)
_CHUNK_BLOCKS = 256


@dataclass(frozen=True)
class EntropyConfig:
    num_bins: int = 64
    sigma: float | None = None  # None -> one bin width, 2 / (num_bins - 1)
    epsilon: float = 1e-9

    def __post_init__(self):
        if self.num_bins < 2:
            raise ConfigError(f"num_bins must be >= 2, got {self.num_bins}")
        if self.sigma is None:
            object.__setattr__(self, "sigma", 2.0 / (self.num_bins - 1))
        if not self.sigma > 0:
            raise ConfigError(f"sigma must be positive, got {self.sigma}")
        if not self.epsilon > 0:
            raise ConfigError(f"epsilon must be positive, got {self.epsilon}")

    @property
    def max_entropy(self) -> float:
        return math.log(self.num_bins)


@dataclass(frozen=True, eq=False)
class EntropyTracks:
    h_f: np.ndarray
    h_m: np.ndarray
    h_c: np.ndarray

    def __post_init__(self):
        for name in ("h_f", "h_m", "h_c"):
            object.__setattr__(self, name, np.asarray(getattr(self, name), dtype=np.float64))
        if not len(self.h_f) == 2 * len(self.h_m) == 4 * len(self.h_c):
            raise ShapeError(
                f"track lengths must be T, T/2, T/4; got {len(self.h_f)}, {len(self.h_m)}, {len(self.h_c)}"
            )

    def scaled(self, factor: float) -> "EntropyTracks":
        return EntropyTracks(self.h_f * factor, self.h_m * factor, self.h_c * factor)


def bin_centers(num_bins: int) -> np.ndarray:
    if num_bins < 2:
        raise ConfigError(f"need at least 2 bins, got {num_bins}")
    return -1.0 + 2.0 * np.arange(num_bins) / (num_bins - 1)


def sample_affinities(x_t: float, config: EntropyConfig) -> np.ndarray:
    u = bin_centers(config.num_bins)
    return np.exp(-((x_t - u) ** 2) / (2.0 * config.sigma ** 2))


def _fixed_affinities(x: np.ndarray, config: EntropyConfig) -> np.ndarray:
    u = bin_centers(config.num_bins)
    g = np.exp(-((x[..., None] - u) ** 2) / (2.0 * config.sigma ** 2))
    return np.rint(g * _FIXED_SCALE).astype(np.int64)


def _entropy_from_sums(sums: np.ndarray, counts, config: EntropyConfig) -> np.ndarray:
    """Entropy of averaged affinities; ``sums`` are fixed-point window totals."""
    mean = sums / (np.asarray(counts, dtype=np.float64)[..., None] * _FIXED_SCALE)
    p = mean / (mean.sum(axis=-1, keepdims=True) + config.epsilon)
    plogp = np.where(p > 0, p * np.log(np.where(p > 0, p, 1.0)), 0.0)
    h = -plogp.sum(axis=-1)
    # epsilon leaves sum(p) slightly below 1; for N < e that can nudge H past log N
    return np.clip(h, 0.0, config.max_entropy)


def segment_entropy(segment, config: EntropyConfig | None = None) -> float:
    config = config or EntropyConfig()
    x = np.asarray(segment, dtype=np.float64).reshape(-1)
    if len(x) == 0:
        raise EmptyInputError("segment is empty")
    sums = _fixed_affinities(x, config).sum(axis=0)
    return float(_entropy_from_sums(sums, len(x), config))


def _block_sums(x: np.ndarray, block: int, config: EntropyConfig) -> np.ndarray:
    n_blocks = len(x) // block
    out = np.empty((n_blocks, config.num_bins), dtype=np.int64)
    for start in range(0, n_blocks, _CHUNK_BLOCKS):
        stop = min(start + _CHUNK_BLOCKS, n_blocks)
        chunk = x[start * block:stop * block].reshape(stop - start, block)
        out[start:stop] = _fixed_affinities(chunk, config).sum(axis=1)
    return out


def _level_track(blocks: np.ndarray, block: int, length: int, spec: ResolutionSpec,
                 config: EntropyConfig) -> np.ndarray:
    offset = (spec.receptive_field - spec.stride) // 2
    n_out = length // spec.stride
    hop, span, lead = spec.stride // block, spec.receptive_field // block, offset // block
    # zero blocks outside the signal make clamped windows fall out of the sum
    padded = np.concatenate([
        np.zeros((lead, blocks.shape[1]), dtype=np.int64),
        blocks,
        np.zeros((span, blocks.shape[1]), dtype=np.int64),
    ])
    starts = np.arange(n_out) * hop
    sums = np.zeros((n_out, blocks.shape[1]), dtype=np.int64)
    for j in range(span):
        sums += padded[starts + j]
    lo = np.clip(np.arange(n_out) * spec.stride - offset, 0, length)
    hi = np.clip(np.arange(n_out) * spec.stride - offset + spec.receptive_field, 0, length)
    return _entropy_from_sums(sums, hi - lo, config)


def entropy_tracks(audio: AudioBuffer, specs: tuple[ResolutionSpec, ...] | None = None,
                   config: EntropyConfig | None = None) -> EntropyTracks:
    """Sliding-window entropy at each resolution.

    Window ``k`` of a resolution starts at ``k * stride - (receptive_field - stride) / 2``
    and is clamped to the signal, so it is centered on the latent frame.
    """
    config = config or EntropyConfig()
    specs = specs or resolution_specs(audio.sample_rate)
    x = audio.samples
    coarse = max(s.stride for s in specs)
    if len(x) < coarse:
        raise TooShortError(f"audio has {len(x)} samples, need at least one coarse stride ({coarse})")
    if len(x) % coarse:
        raise AlignmentError(f"audio length {len(x)} is not a multiple of {coarse}")
    offsets = [(s.receptive_field - s.stride) // 2 for s in specs]
    block = reduce(math.gcd, [len(x)] + [s.stride for s in specs]
                   + [s.receptive_field for s in specs] + [o for o in offsets if o])
    blocks = _block_sums(x, block, config)
    h_f, h_m, h_c = (_level_track(blocks, block, len(x), s, config) for s in specs)
    return EntropyTracks(h_f, h_m, h_c)
