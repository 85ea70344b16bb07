"""Residual vector quantization and residual k-means codebook training.

Stage ``i`` quantizes what stages ``1..i-1`` left over, so decoding with
the first ``n_q`` stages is always a valid (coarser) reconstruction:
codebook dropout needs no extra machinery.

Codebook files (``.tfcb``) are little-endian::

    "TFCB" | u8 version=1 | u8 resolution id | u16 D | u16 K | u8 N_q
    | N_q * K * D float32 | u32 CRC-32 of the float payload
"""

from __future__ import annotations

import hashlib
import logging
import struct
import zlib
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .errors import (
    ChecksumError,
    CodebookMismatchError,
    CorruptCodeError,
    InsufficientDataError,
    ShapeError,
    StreamFormatError,
    UnsupportedVersionError,
)
from .transform import Level, LatentSequence

log = logging.getLogger(__name__)

CODEBOOK_MAGIC = b"TFCB"
CODEBOOK_VERSION = 1
_HEADER = struct.Struct("<4sBBHHB")
_BLOCK_FRAMES = 256  # fixed search block: results never depend on the worker count
_LEVEL_BY_CODE = {lvl.code: lvl for lvl in Level}


@dataclass(frozen=True, eq=False)
class RvqCodebooks:
    stages: np.ndarray  # (N_q, K, D)
    level: Level = Level.FINE
    seed: int | None = None

    def __post_init__(self):
        stages = np.asarray(self.stages, dtype=np.float64)
        if stages.ndim != 3:
            raise ShapeError(f"codebooks must have shape (N_q, K, D), got {stages.shape}")
        k = stages.shape[1]
        if k < 1 or k & (k - 1):
            raise ShapeError(f"codebook size must be a power of two, got {k}")
        stages.flags.writeable = False
        object.__setattr__(self, "stages", stages)
        object.__setattr__(self, "level", Level(self.level))
        object.__setattr__(self, "_norms", np.einsum("skd,skd->sk", stages, stages))

    @property
    def num_stages(self) -> int:
        return self.stages.shape[0]

    @property
    def size(self) -> int:
        return self.stages.shape[1]

    @property
    def dim(self) -> int:
        return self.stages.shape[2]

    @property
    def bits(self) -> int:
        return self.size.bit_length() - 1

    def to_bytes(self) -> bytes:
        payload = self.stages.astype("<f4").tobytes()
        header = _HEADER.pack(CODEBOOK_MAGIC, CODEBOOK_VERSION, self.level.code,
                              self.dim, self.size, self.num_stages)
        return header + payload + struct.pack("<I", zlib.crc32(payload))

    @classmethod
    def from_bytes(cls, data: bytes) -> "RvqCodebooks":
        if len(data) < _HEADER.size + 4:
            raise StreamFormatError("codebook file shorter than its header")
        magic, version, level, dim, size, n_q = _HEADER.unpack_from(data)
        if magic != CODEBOOK_MAGIC:
            raise StreamFormatError(f"bad codebook magic {magic!r}")
        if version != CODEBOOK_VERSION:
            raise UnsupportedVersionError(f"codebook version {version} not supported")
        if level not in _LEVEL_BY_CODE:
            raise StreamFormatError(f"unknown resolution id {level}")
        n_floats = n_q * size * dim
        end = _HEADER.size + 4 * n_floats
        if len(data) != end + 4:
            raise StreamFormatError(f"codebook file is {len(data)} bytes, expected {end + 4}")
        payload = data[_HEADER.size:end]
        (crc,) = struct.unpack_from("<I", data, end)
        if crc != zlib.crc32(payload):
            raise ChecksumError("codebook checksum mismatch")
        stages = np.frombuffer(payload, dtype="<f4").reshape(n_q, size, dim)
        return cls(stages.astype(np.float64), _LEVEL_BY_CODE[level])

    def save(self, path) -> None:
        Path(path).write_bytes(self.to_bytes())

    @classmethod
    def load(cls, path) -> "RvqCodebooks":
        return cls.from_bytes(Path(path).read_bytes())


@dataclass(frozen=True, eq=False)
class CodeSequence:
    indices: np.ndarray  # (frames, n_q)

    def __post_init__(self):
        idx = np.asarray(self.indices, dtype=np.int64)
        if idx.ndim != 2 or idx.shape[1] < 1:
            raise ShapeError(f"indices must have shape (frames, n_q >= 1), got {idx.shape}")
        object.__setattr__(self, "indices", idx)

    @property
    def n_q(self) -> int:
        return self.indices.shape[1]

    @property
    def num_frames(self) -> int:
        return self.indices.shape[0]

    def truncated(self, n_q: int) -> "CodeSequence":
        return CodeSequence(self.indices[:, :n_q])


def _search_block(frames: np.ndarray, books: RvqCodebooks, n_q: int):
    residual = frames.copy()
    indices = np.empty((len(frames), n_q), dtype=np.int64)
    for i in range(n_q):
        # ||r - c||^2 minus the per-row constant ||r||^2; argmin keeps the first minimum
        dist = books._norms[i][None, :] - 2.0 * (residual @ books.stages[i].T)
        best = np.argmin(dist, axis=1)
        indices[:, i] = best
        residual -= books.stages[i][best]
    return indices


def quantize(frames: np.ndarray, books: RvqCodebooks, n_q: int, workers: int = 1):
    """Exhaustive RVQ search. Returns (indices (T, n_q), reconstruction (T, D))."""
    frames = np.asarray(frames, dtype=np.float64)
    if not 1 <= n_q <= books.num_stages:
        raise ValueError(f"n_q must be in [1, {books.num_stages}], got {n_q}")
    if frames.ndim != 2 or frames.shape[1] != books.dim:
        raise ShapeError(f"expected frames of dimension {books.dim}, got shape {frames.shape}")
    blocks = [frames[i:i + _BLOCK_FRAMES] for i in range(0, len(frames), _BLOCK_FRAMES)]
    if workers > 1 and len(blocks) > 1:
        with ThreadPoolExecutor(workers) as pool:
            parts = list(pool.map(lambda b: _search_block(b, books, n_q), blocks))
    else:
        parts = [_search_block(b, books, n_q) for b in blocks]
    indices = np.concatenate(parts) if parts else np.empty((0, n_q), dtype=np.int64)
    return indices, dequantize(indices, books)


def dequantize(indices: np.ndarray, books: RvqCodebooks) -> np.ndarray:
    indices = np.asarray(indices, dtype=np.int64)
    if indices.ndim != 2:
        raise ShapeError(f"indices must be 2-D, got shape {indices.shape}")
    n_q = indices.shape[1]
    if n_q > books.num_stages:
        raise CodebookMismatchError(f"{n_q} stages requested, codebooks have {books.num_stages}")
    if indices.size and (indices.min() < 0 or indices.max() >= books.size):
        raise CorruptCodeError(f"codeword index outside [0, {books.size})")
    out = np.zeros((indices.shape[0], books.dim))
    # stage order fixed so partial sums are reproducible prefixes
    for i in range(n_q):
        out += books.stages[i][indices[:, i]]
    return out


def rvq_encode(z: LatentSequence, books: RvqCodebooks, n_q: int, workers: int = 1):
    indices, zhat = quantize(z.frames, books, n_q, workers)
    return CodeSequence(indices), LatentSequence(zhat, z.frame_rate, z.stride, z.receptive_field)


def rvq_decode(codes: CodeSequence, books: RvqCodebooks, frame_rate: float = 75.0,
               stride: int = 320, receptive_field: int = 640) -> LatentSequence:
    return LatentSequence(dequantize(codes.indices, books), frame_rate, stride, receptive_field)


# --- training ---------------------------------------------------------------

def _sq_dists(x: np.ndarray, x_norms: np.ndarray, centers: np.ndarray) -> np.ndarray:
    c_norms = np.einsum("kd,kd->k", centers, centers)
    d = x_norms[:, None] - 2.0 * (x @ centers.T) + c_norms[None, :]
    return np.maximum(d, 0.0)


def _kmeans_pp(x: np.ndarray, x_norms: np.ndarray, k: int, rng: np.random.Generator) -> np.ndarray:
    n = len(x)
    chosen = np.empty(k, dtype=np.int64)
    chosen[0] = rng.integers(n)
    closest = np.maximum(x_norms - 2.0 * (x @ x[chosen[0]]) + x_norms[chosen[0]], 0.0)
    for j in range(1, k):
        total = closest.sum()
        if total <= 0:
            # every point already coincides with a center; fill deterministically
            chosen[j] = rng.integers(n)
        else:
            chosen[j] = min(np.searchsorted(np.cumsum(closest), rng.random() * total, side="right"), n - 1)
        d = np.maximum(x_norms - 2.0 * (x @ x[chosen[j]]) + x_norms[chosen[j]], 0.0)
        np.minimum(closest, d, out=closest)
    return x[chosen].copy()


def _assign(x, x_norms, centers):
    labels = np.empty(len(x), dtype=np.int64)
    dist = np.empty(len(x))
    for i in range(0, len(x), 4096):
        d = _sq_dists(x[i:i + 4096], x_norms[i:i + 4096], centers)
        labels[i:i + 4096] = np.argmin(d, axis=1)
        dist[i:i + 4096] = d[np.arange(len(d)), labels[i:i + 4096]]
    return labels, dist


def kmeans(x: np.ndarray, k: int, rng: np.random.Generator, iters: int) -> np.ndarray:
    """Lloyd's algorithm from a k-means++ start; empty clusters jump to the farthest points."""
    x_norms = np.einsum("nd,nd->n", x, x)
    centers = _kmeans_pp(x, x_norms, k, rng)
    for _ in range(max(iters, 1)):
        labels, dist = _assign(x, x_norms, centers)
        counts = np.bincount(labels, minlength=k)
        order = np.argsort(labels, kind="stable")
        sums = np.zeros_like(centers)
        occupied = np.flatnonzero(counts)
        starts = np.concatenate([[0], np.cumsum(counts[occupied])[:-1]])
        sums[occupied] = np.add.reduceat(x[order], starts, axis=0)
        centers[occupied] = sums[occupied] / counts[occupied, None]
        empty = np.flatnonzero(counts == 0)
        if len(empty):
            far = np.argsort(-dist, kind="stable")[: len(empty)]
            centers[empty] = x[far]
    return centers


def train_rvq(latents, num_stages: int, size: int, seed: int = 0, iters: int = 20,
              level: Level = Level.FINE) -> tuple[RvqCodebooks, list[float]]:
    """Fit ``num_stages`` codebooks of ``size`` entries on successive residuals.

    ``latents`` is a LatentSequence, an array of frames, or an iterable of
    either. Returns the codebooks and the mean squared residual after each
    stage (index 0 is the energy of the raw frames).
    """
    if isinstance(latents, (LatentSequence, np.ndarray)):
        latents = [latents]
    parts = [l.frames if isinstance(l, LatentSequence) else np.asarray(l, dtype=np.float64) for l in latents]
    x = np.concatenate(parts) if parts else np.empty((0, 0))
    if size < 1 or size & (size - 1):
        raise ValueError(f"codebook size must be a power of two, got {size}")
    if len(x) < size:
        raise InsufficientDataError(f"{len(x)} training frames, need at least {size}")

    seeds = np.random.SeedSequence([seed, level.code]).spawn(num_stages)
    residual = x.copy()
    stages = []
    distortion = [float(np.mean(np.sum(residual ** 2, axis=1)))]
    for i in range(num_stages):
        centers = kmeans(residual, size, np.random.default_rng(seeds[i]), iters)
        # stored as float32 on disk; train against exactly what will be loaded
        centers = centers.astype(np.float32).astype(np.float64)
        stages.append(centers)
        labels, _ = _assign(residual, np.einsum("nd,nd->n", residual, residual), centers)
        residual -= centers[labels]
        distortion.append(float(np.mean(np.sum(residual ** 2, axis=1))))
        log.info("%s stage %d: mean squared residual %.6g", level.value, i + 1, distortion[-1])
    return RvqCodebooks(np.stack(stages), level, seed), distortion


# --- codebook sets ------------------------------------------------------------

@dataclass(frozen=True, eq=False)
class CodebookSet:
    fine: RvqCodebooks
    medium: RvqCodebooks
    coarse: RvqCodebooks

    def __post_init__(self):
        books = (self.fine, self.medium, self.coarse)
        if len({(b.dim, b.size) for b in books}) != 1:
            raise CodebookMismatchError("all three codebook sets must share D and K")

    def __getitem__(self, level: Level) -> RvqCodebooks:
        return {Level.FINE: self.fine, Level.MEDIUM: self.medium, Level.COARSE: self.coarse}[Level(level)]

    @property
    def bits(self) -> int:
        return self.fine.bits

    @property
    def dim(self) -> int:
        return self.fine.dim

    @property
    def num_stages(self) -> int:
        return min(b.num_stages for b in (self.fine, self.medium, self.coarse))

    @property
    def identifier(self) -> bytes:
        """16-byte BLAKE2b digest over the three serialized codebook files."""
        h = hashlib.blake2b(digest_size=16)
        for b in (self.fine, self.medium, self.coarse):
            h.update(b.to_bytes())
        return h.digest()

    def save(self, directory) -> list[Path]:
        directory = Path(directory)
        directory.mkdir(parents=True, exist_ok=True)
        paths = []
        for level in Level:
            path = directory / f"{level.value}.tfcb"
            self[level].save(path)
            paths.append(path)
        return paths

    @classmethod
    def load(cls, directory) -> "CodebookSet":
        directory = Path(directory)
        books = {}
        for level in Level:
            b = RvqCodebooks.load(directory / f"{level.value}.tfcb")
            if b.level is not level:
                raise CodebookMismatchError(f"{level.value}.tfcb holds {b.level.value} codebooks")
            books[level.value] = b
        return cls(**books)
