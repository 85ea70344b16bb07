"""Temporally flexible coding: a variable-frame-rate speech codec pipeline."""

__version__ = "0.1.0"

from .allocator import GranularityMasks, GranularityRatios, allocate_masks, average_frame_rate, ratios_for_target
from .audio_io import AudioBuffer, load_wav, normalize_peak, pad_to_slot_multiple, save_wav
from .bitstream import VfrStream, measure_bitrate, pack, unpack
from .entropy import EntropyConfig, EntropyTracks, entropy_tracks, segment_entropy
from .pipeline import CodecConfig, analyze_signal, decode, encode
from .rvq import CodebookSet, RvqCodebooks, rvq_decode, rvq_encode, train_rvq
from .transform import LatentSequence, analyze, downsample_latents, synthesize

__all__ = [
    "AudioBuffer", "CodebookSet", "CodecConfig", "EntropyConfig", "EntropyTracks", "GranularityMasks",
    "GranularityRatios", "LatentSequence", "RvqCodebooks", "VfrStream", "allocate_masks", "analyze",
    "analyze_signal", "average_frame_rate", "decode", "downsample_latents", "encode", "entropy_tracks",
    "load_wav", "measure_bitrate", "normalize_peak", "pack", "pad_to_slot_multiple", "ratios_for_target",
    "rvq_decode", "rvq_encode", "save_wav", "segment_entropy", "synthesize", "train_rvq", "unpack",
]
