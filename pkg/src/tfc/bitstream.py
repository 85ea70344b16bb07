"""The ``.tfc`` variable-frame-rate container.

Layout (integers little-endian)::

    "TFC1" | u8 version=1
    | u32 sample_rate | u16 stride | u8 n_q | u8 codebook_bits | u16 latent_dim
    | u32 num_coarse_slots | u64 original_length | 16-byte codebook set id
    | slot patterns, 3 bits each, MSB first, zero padded to a byte
    | payload indices, codebook_bits each, MSB first, zero padded to a byte
    | u32 CRC-32 of everything before it

Payload frames appear in temporal order; within a slot the pattern fixes
which resolution each frame belongs to.
"""

from __future__ import annotations

import struct
import zlib
from dataclasses import dataclass
from enum import IntEnum

import numpy as np

from .allocator import GranularityMasks
from .errors import (
    ChecksumError,
    DegenerateInputError,
    InvariantError,
    StreamFormatError,
    StructuralError,
    UnsupportedVersionError,
)
from .rvq import CodeSequence
from .transform import Level

MAGIC = b"TFC1"
VERSION = 1
PATTERN_BITS = 3
_HEADER = struct.Struct("<4sBIHBBHIQ16s")
HEADER_SIZE = _HEADER.size
CHECKSUM_SIZE = 4


class SlotPattern(IntEnum):
    """Coding structure of one coarse slot (four fine positions)."""

    C = 0
    MM = 1
    M_FF = 2  # medium frame, then two fine frames
    FF_M = 3
    FF_FF = 4

    @property
    def levels(self) -> tuple[Level, ...]:
        """Frame levels in temporal order."""
        F, M, C = Level.FINE, Level.MEDIUM, Level.COARSE
        return {
            SlotPattern.C: (C,),
            SlotPattern.MM: (M, M),
            SlotPattern.M_FF: (M, F, F),
            SlotPattern.FF_M: (F, F, M),
            SlotPattern.FF_FF: (F, F, F, F),
        }[self]

    @property
    def num_frames(self) -> int:
        return len(self.levels)


_FRAMES_PER_PATTERN = np.array([p.num_frames for p in SlotPattern])


def masks_to_patterns(masks: GranularityMasks) -> np.ndarray:
    n = len(masks.b_c)
    b_f = masks.b_f.reshape(n, 4)
    b_m = masks.b_m.reshape(n, 2)
    b_c = masks.b_c
    ok_c = (b_c == 1) & (b_m.sum(1) == 0) & (b_f.sum(1) == 0)
    half_fine = (b_f.reshape(n, 2, 2).sum(2) == 2) & (b_m == 0)
    half_medium = (b_m == 1) & (b_f.reshape(n, 2, 2).sum(2) == 0)
    half_ok = (half_fine | half_medium).all(1) & (b_c == 0)
    if not (ok_c | half_ok).all():
        raise InvariantError("masks violate the partition identity")
    # halves: medium -> 1, fine -> 0
    code = np.where(b_m[:, 0] == 1, 1, 0) * 2 + np.where(b_m[:, 1] == 1, 1, 0)
    table = np.array([SlotPattern.FF_FF, SlotPattern.FF_M, SlotPattern.M_FF, SlotPattern.MM])
    return np.where(ok_c, SlotPattern.C, table[code]).astype(np.int64)


def patterns_to_masks(patterns) -> GranularityMasks:
    p = np.asarray(patterns, dtype=np.int64)
    if p.size and (p.min() < 0 or p.max() > SlotPattern.FF_FF):
        raise StructuralError("invalid slot pattern symbol")
    b_c = (p == SlotPattern.C).astype(np.int8)
    first_m = np.isin(p, (SlotPattern.MM, SlotPattern.M_FF))
    second_m = np.isin(p, (SlotPattern.MM, SlotPattern.FF_M))
    b_m = np.stack([first_m, second_m], axis=1).reshape(-1).astype(np.int8)
    b_f = 1 - np.repeat(b_m, 2) - np.repeat(b_c, 4)
    return GranularityMasks(b_f, b_m, b_c)


def frame_order(masks: GranularityMasks) -> tuple[np.ndarray, np.ndarray]:
    """Temporal order of coded frames as (level codes, index within level)."""
    fine = np.flatnonzero(masks.b_f)
    med = np.flatnonzero(masks.b_m)
    coarse = np.flatnonzero(masks.b_c)
    starts = np.concatenate([fine, 2 * med, 4 * coarse])
    levels = np.concatenate([np.full(len(fine), Level.FINE.code), np.full(len(med), Level.MEDIUM.code),
                             np.full(len(coarse), Level.COARSE.code)])
    index = np.concatenate([fine, med, coarse])
    order = np.argsort(starts, kind="stable")
    return levels[order], index[order]


@dataclass(frozen=True, eq=False)
class VfrStream:
    sample_rate: int
    stride: int
    n_q: int
    codebook_bits: int
    latent_dim: int
    original_length: int
    codebook_id: bytes
    patterns: np.ndarray  # one SlotPattern value per coarse slot
    payload: CodeSequence  # frames in temporal order

    def __post_init__(self):
        patterns = np.asarray(self.patterns, dtype=np.int64).reshape(-1)
        object.__setattr__(self, "patterns", patterns)
        if len(self.codebook_id) != 16:
            raise StructuralError("codebook id must be 16 bytes")
        if patterns.size and (patterns.min() < 0 or patterns.max() > SlotPattern.FF_FF):
            raise StructuralError("invalid slot pattern symbol")
        if not 1 <= self.codebook_bits <= 16:
            raise StructuralError(f"codebook_bits must be in [1, 16], got {self.codebook_bits}")
        expected = self.num_frames_from_patterns
        if self.payload.num_frames != expected:
            raise StructuralError(f"patterns imply {expected} frames, payload has {self.payload.num_frames}")
        if self.payload.n_q != self.n_q:
            raise StructuralError(f"payload has {self.payload.n_q} stages, header says {self.n_q}")
        idx = self.payload.indices
        if idx.size and (idx.min() < 0 or idx.max() >= 1 << self.codebook_bits):
            raise StructuralError("payload index exceeds codebook size")

    @property
    def num_slots(self) -> int:
        return len(self.patterns)

    @property
    def num_frames_from_patterns(self) -> int:
        return int(_FRAMES_PER_PATTERN[self.patterns].sum()) if self.num_slots else 0

    @property
    def num_frames(self) -> int:
        return self.payload.num_frames

    def masks(self) -> GranularityMasks:
        return patterns_to_masks(self.patterns)

    def __eq__(self, other):
        if not isinstance(other, VfrStream):
            return NotImplemented
        return (
            (self.sample_rate, self.stride, self.n_q, self.codebook_bits, self.latent_dim,
             self.original_length, self.codebook_id)
            == (other.sample_rate, other.stride, other.n_q, other.codebook_bits, other.latent_dim,
                other.original_length, other.codebook_id)
            and np.array_equal(self.patterns, other.patterns)
            and np.array_equal(self.payload.indices, other.payload.indices)
        )


def _pack_uints(values: np.ndarray, width: int) -> bytes:
    values = np.asarray(values, dtype=np.uint32).reshape(-1)
    shifts = np.arange(width - 1, -1, -1, dtype=np.uint32)
    bits = ((values[:, None] >> shifts) & 1).astype(np.uint8)
    return np.packbits(bits.reshape(-1)).tobytes()


def _unpack_uints(data: bytes, count: int, width: int) -> np.ndarray:
    bits = np.unpackbits(np.frombuffer(data, dtype=np.uint8))[: count * width]
    weights = 1 << np.arange(width - 1, -1, -1, dtype=np.int64)
    return bits.reshape(count, width).astype(np.int64) @ weights


def _nbytes(n_bits: int) -> int:
    return (n_bits + 7) // 8


def pack(stream: VfrStream) -> bytes:
    header = _HEADER.pack(MAGIC, VERSION, stream.sample_rate, stream.stride, stream.n_q,
                          stream.codebook_bits, stream.latent_dim, stream.num_slots,
                          stream.original_length, stream.codebook_id)
    body = header + _pack_uints(stream.patterns, PATTERN_BITS) \
        + _pack_uints(stream.payload.indices, stream.codebook_bits)
    return body + struct.pack("<I", zlib.crc32(body))


def unpack(data: bytes) -> VfrStream:
    data = bytes(data)
    if len(data) < HEADER_SIZE + CHECKSUM_SIZE:
        raise StreamFormatError(f"stream is {len(data)} bytes, shorter than the fixed header")
    (magic, version, sample_rate, stride, n_q, bits, dim, slots, original_length,
     codebook_id) = _HEADER.unpack_from(data)
    if magic != MAGIC:
        raise StreamFormatError(f"bad magic {magic!r}")
    if version != VERSION:
        raise UnsupportedVersionError(f"stream version {version} not supported")
    (crc,) = struct.unpack_from("<I", data, len(data) - CHECKSUM_SIZE)
    if crc != zlib.crc32(data[:-CHECKSUM_SIZE]):
        raise ChecksumError("checksum mismatch: stream is corrupted")
    if not 1 <= bits <= 16 or n_q < 1:
        raise StructuralError(f"invalid header: codebook_bits={bits}, n_q={n_q}")

    pos = HEADER_SIZE
    pattern_bytes = _nbytes(slots * PATTERN_BITS)
    if pos + pattern_bytes > len(data) - CHECKSUM_SIZE:
        raise StructuralError("stream too short for its slot patterns")
    patterns = _unpack_uints(data[pos:pos + pattern_bytes], slots, PATTERN_BITS)
    pos += pattern_bytes
    if patterns.size and patterns.max() > SlotPattern.FF_FF:
        raise StructuralError("invalid slot pattern symbol")
    frames = int(_FRAMES_PER_PATTERN[patterns].sum()) if slots else 0
    payload_bytes = _nbytes(frames * n_q * bits)
    if pos + payload_bytes != len(data) - CHECKSUM_SIZE:
        raise StructuralError(
            f"payload is {len(data) - CHECKSUM_SIZE - pos} bytes, patterns imply {payload_bytes}"
        )
    indices = _unpack_uints(data[pos:pos + payload_bytes], frames * n_q, bits).reshape(frames, n_q)
    return VfrStream(sample_rate, stride, n_q, bits, dim, original_length, codebook_id,
                     patterns, CodeSequence(indices))


@dataclass(frozen=True)
class BitrateReport:
    duration: float
    frames: int
    frames_per_second: float
    payload_bps: float
    pattern_bps: float
    header_bps: float
    overhead_bps: float
    total_bps: float
    # same payload over the coded timeline (whole slots, padding included)
    coded_duration: float
    coded_frame_rate: float
    coded_payload_bps: float


def measure_bitrate(stream: VfrStream) -> BitrateReport:
    if stream.sample_rate == 0 or stream.original_length == 0:
        raise DegenerateInputError("stream has zero duration")
    duration = stream.original_length / stream.sample_rate
    payload_bits = stream.num_frames * stream.n_q * stream.codebook_bits
    pattern_bits = stream.num_slots * PATTERN_BITS
    header_bits = 8 * (HEADER_SIZE + CHECKSUM_SIZE)
    coded = stream.num_slots * 4 * stream.stride / stream.sample_rate
    return BitrateReport(
        duration=duration,
        frames=stream.num_frames,
        frames_per_second=stream.num_frames / duration,
        payload_bps=payload_bits / duration,
        pattern_bps=pattern_bits / duration,
        header_bps=header_bits / duration,
        overhead_bps=(pattern_bits + header_bits) / duration,
        total_bps=(payload_bits + pattern_bits + header_bits) / duration,
        coded_duration=coded,
        coded_frame_rate=stream.num_frames / coded if coded else 0.0,
        coded_payload_bps=payload_bits / coded if coded else 0.0,
    )
