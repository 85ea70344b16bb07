"""End-to-end encode/decode."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .allocator import GranularityMasks, GranularityRatios, allocate_masks
from .audio_io import AudioBuffer, normalize_peak, pad_to_slot_multiple
from .bitstream import VfrStream, frame_order, masks_to_patterns
from .entropy import EntropyConfig, EntropyTracks, entropy_tracks
from .errors import CodebookMismatchError, ConfigError
from .fusion import LadderMode, fuse, ladder_decode
from .metrics import MetricConfig
from .rvq import CodebookSet, CodeSequence, dequantize, quantize
from .transform import DEFAULT_STRIDE, Level, LatentSequence, analyze, downsample_latents, resolution_specs, \
    synthesize

DEFAULT_RATIOS = GranularityRatios(0.4, 0.3, 0.3)
SLOT_FACTOR = 4


@dataclass(frozen=True)
class CodecConfig:
    codebooks: CodebookSet | None = None
    ratios: GranularityRatios = DEFAULT_RATIOS
    n_q: int = 8
    entropy: EntropyConfig = field(default_factory=EntropyConfig)
    metrics: MetricConfig = field(default_factory=MetricConfig)
    ladder: LadderMode = LadderMode.SELECT_EXACT
    workers: int = 1  # threads for the RVQ search; output does not depend on it

    def __post_init__(self):
        if self.n_q < 1:
            raise ConfigError(f"n_q must be at least 1, got {self.n_q}")
        if self.codebooks is not None and self.n_q > self.codebooks.num_stages:
            raise ConfigError(f"n_q={self.n_q} exceeds the {self.codebooks.num_stages} trained stages")

    def require_codebooks(self) -> CodebookSet:
        if self.codebooks is None:
            raise ConfigError("no codebooks loaded")
        return self.codebooks


@dataclass(frozen=True, eq=False)
class Analysis:
    """Everything the encoder derives before quantization."""

    audio: AudioBuffer  # normalized and padded
    latents: dict  # Level -> LatentSequence
    tracks: EntropyTracks
    masks: GranularityMasks


def prepare(audio: AudioBuffer) -> AudioBuffer:
    return pad_to_slot_multiple(normalize_peak(audio), DEFAULT_STRIDE, SLOT_FACTOR)


def analyze_signal(audio: AudioBuffer, ratios: GranularityRatios = DEFAULT_RATIOS,
                   entropy: EntropyConfig | None = None) -> Analysis:
    padded = prepare(audio)
    z_f = analyze(padded)
    latents = {
        Level.FINE: z_f,
        Level.MEDIUM: downsample_latents(z_f, 2),
        Level.COARSE: downsample_latents(z_f, 4),
    }
    tracks = entropy_tracks(padded, resolution_specs(padded.sample_rate), entropy or EntropyConfig())
    return Analysis(padded, latents, tracks, allocate_masks(tracks, ratios))


def _level_mask(masks: GranularityMasks, level: Level) -> np.ndarray:
    return {Level.FINE: masks.b_f, Level.MEDIUM: masks.b_m, Level.COARSE: masks.b_c}[level]


def encode(audio: AudioBuffer, config: CodecConfig) -> VfrStream:
    books = config.require_codebooks()
    a = analyze_signal(audio, config.ratios, config.entropy)
    levels, _ = frame_order(a.masks)
    payload = np.empty((len(levels), config.n_q), dtype=np.int64)
    for level in Level:
        # unselected frames are never quantized
        selected = a.latents[level].frames[_level_mask(a.masks, level) == 1]
        indices, _ = quantize(selected, books[level], config.n_q, config.workers)
        payload[levels == level.code] = indices
    return VfrStream(
        sample_rate=a.audio.sample_rate,
        stride=DEFAULT_STRIDE,
        n_q=config.n_q,
        codebook_bits=books.bits,
        latent_dim=books.dim,
        original_length=a.audio.original_length,
        codebook_id=books.identifier,
        patterns=masks_to_patterns(a.masks),
        payload=CodeSequence(payload),
    )


def reconstruct(masks: GranularityMasks, z_f, z_m, z_c, original_length: int,
                sample_rate: int = 24000, mode: LadderMode = LadderMode.SELECT_EXACT) -> AudioBuffer:
    """Fuse per-resolution latents, run the ladder and synthesize audio."""
    fused = fuse(z_f, z_m, z_c, masks)
    y_f = ladder_decode(fused, masks, mode)
    stride = y_f.shape[1]
    out = synthesize(LatentSequence(y_f, sample_rate / stride, stride, 2 * stride), sample_rate=sample_rate)
    return AudioBuffer(out.samples[:original_length], sample_rate, original_length)


def decode(stream: VfrStream, config: CodecConfig) -> AudioBuffer:
    books = config.require_codebooks()
    if stream.codebook_id != books.identifier:
        raise CodebookMismatchError("stream was encoded with a different codebook set")
    if stream.latent_dim != books.dim or stream.codebook_bits != books.bits:
        raise CodebookMismatchError("stream geometry does not match the loaded codebooks")
    if stream.n_q > books.num_stages:
        raise CodebookMismatchError(f"stream uses {stream.n_q} stages, codebooks have {books.num_stages}")
    masks = stream.masks()
    levels, index = frame_order(masks)
    t = masks.num_fine_positions
    per_level = {}
    for level in Level:
        rows = levels == level.code
        full = np.zeros((t // level.factor, books.dim))
        full[index[rows]] = dequantize(stream.payload.indices[rows], books[level])
        per_level[level] = full
    return reconstruct(masks, per_level[Level.FINE], per_level[Level.MEDIUM], per_level[Level.COARSE],
                       stream.original_length, stream.sample_rate, config.ladder)
