"""Masked fusion of the three quantized resolutions and the decoder ladder."""

from __future__ import annotations

from dataclasses import dataclass
from enum import Enum

import numpy as np

from .allocator import GranularityMasks
from .errors import InvariantError, ShapeError
from .transform import LatentSequence, pool_frames


class LadderMode(str, Enum):
    ADDITIVE = "additive"
    SELECT_EXACT = "select_exact"


@dataclass(frozen=True, eq=False)
class FusedLatents:
    frames: np.ndarray  # (T, D) at the fine rate
    provenance: np.ndarray  # per fine position: "F", "M" or "C"


def _as_frames(z) -> np.ndarray:
    return z.frames if isinstance(z, LatentSequence) else np.asarray(z, dtype=np.float64)


def fuse(z_f, z_m, z_c, masks: GranularityMasks) -> FusedLatents:
    """z = z_f*b_f + up2(z_m*b_m) + up4(z_c*b_c)."""
    f, m, c = _as_frames(z_f), _as_frames(z_m), _as_frames(z_c)
    t = masks.num_fine_positions
    if len(f) != t or len(m) != t // 2 or len(c) != t // 4:
        raise ShapeError(f"latent lengths {len(f)}, {len(m)}, {len(c)} do not match masks for T={t}")
    if not f.shape[1:] == m.shape[1:] == c.shape[1:]:
        raise ShapeError("latent dimensions differ between resolutions")
    if not np.array_equal(masks.coverage(), np.ones(t, dtype=np.int8)):
        raise InvariantError("masks violate the partition identity")
    out = (f * masks.b_f[:, None]
           + np.repeat(m * masks.b_m[:, None], 2, axis=0)
           + np.repeat(c * masks.b_c[:, None], 4, axis=0))
    return FusedLatents(out, masks.levels())


def ladder_decode(fused: FusedLatents, masks: GranularityMasks,
                  mode: LadderMode | str = LadderMode.SELECT_EXACT) -> np.ndarray:
    """Coarse-to-fine refinement; returns the fine-rate sequence y_f.

    ``additive`` adds masked pooled features onto upsampled coarser
    levels, with nearest-frame repetition standing in for the learned
    upsamplers. ``select_exact`` takes each level from the fused sequence
    as-is, so y_f is the fused input itself.
    """
    mode = LadderMode(mode)
    z = fused.frames
    if len(z) != masks.num_fine_positions:
        raise ShapeError(f"{len(z)} fused frames but masks cover {masks.num_fine_positions}")
    if mode is LadderMode.SELECT_EXACT:
        return z.copy()
    y_c = pool_frames(z, 4)
    y_m = np.repeat(y_c, 2, axis=0) + pool_frames(z, 2) * masks.b_m[:, None]
    return np.repeat(y_m, 2, axis=0) + z * masks.b_f[:, None]
