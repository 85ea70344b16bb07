"""Granularity masks from entropy tracks, plus frame-rate arithmetic.

Quantile thresholds are realized as exact rank selection: the ``k`` lowest
entropy positions win, ties going to the smaller index. That keeps frame
counts (and therefore bitrates) exact and deterministic.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from enum import Enum

import numpy as np

from .entropy import EntropyTracks
from .errors import ConfigError, InfeasibleTargetError, InvariantError, ShapeError

RATIO_TOLERANCE = 1e-9


@dataclass(frozen=True)
class GranularityRatios:
    """Shares of the timeline coded at fine, medium and coarse granularity."""

    r_f: float
    r_m: float
    r_c: float

    def __post_init__(self):
        values = (self.r_f, self.r_m, self.r_c)
        if any(not math.isfinite(v) or v < 0 for v in values):
            raise ConfigError(f"granularity ratios must be non-negative, got {values}")
        if abs(math.fsum(values) - 1.0) > RATIO_TOLERANCE:
            raise ConfigError(f"granularity ratios must sum to 1, got {values} (sum {math.fsum(values)})")

    @classmethod
    def parse(cls, text: str) -> "GranularityRatios":
        parts = [p for p in text.replace(":", ",").split(",") if p.strip()]
        if len(parts) != 3:
            raise ConfigError(f"expected three comma-separated ratios, got {text!r}")
        try:
            return cls(*(float(p) for p in parts))
        except ValueError as exc:
            if isinstance(exc, ConfigError):
                raise
            raise ConfigError(f"cannot parse ratios {text!r}") from exc

    def as_tuple(self) -> tuple[float, float, float]:
        return (self.r_f, self.r_m, self.r_c)

    def __str__(self):
        return ":".join(f"{v:g}" for v in self.as_tuple())


class MixPolicy(str, Enum):
    FINE_COARSE = "fine_coarse_mix"
    FINE_MEDIUM = "fine_medium_mix"
    MEDIUM_COARSE = "medium_coarse_mix"


@dataclass(frozen=True, eq=False)
class GranularityMasks:
    b_f: np.ndarray
    b_m: np.ndarray
    b_c: np.ndarray

    def __post_init__(self):
        for name in ("b_f", "b_m", "b_c"):
            arr = np.asarray(getattr(self, name))
            if arr.ndim != 1 or not np.isin(arr, (0, 1)).all():
                raise InvariantError(f"{name} must be a binary vector")
            arr = arr.astype(np.int8)
            arr.flags.writeable = False
            object.__setattr__(self, name, arr)
        if not len(self.b_f) == 2 * len(self.b_m) == 4 * len(self.b_c):
            raise ShapeError(
                f"mask lengths must be T, T/2, T/4; got {len(self.b_f)}, {len(self.b_m)}, {len(self.b_c)}"
            )
        if not np.array_equal(self.coverage(), np.ones(len(self.b_f), dtype=np.int8)):
            raise InvariantError("masks do not partition the timeline: b_f + up2(b_m) + up4(b_c) != 1")

    def coverage(self) -> np.ndarray:
        return self.b_f + np.repeat(self.b_m, 2) + np.repeat(self.b_c, 4)

    @property
    def num_fine_positions(self) -> int:
        return len(self.b_f)

    @property
    def counts(self) -> tuple[int, int, int]:
        """(fine, medium, coarse) frame counts."""
        return int(self.b_f.sum()), int(self.b_m.sum()), int(self.b_c.sum())

    @property
    def num_frames(self) -> int:
        return sum(self.counts)

    def levels(self) -> np.ndarray:
        """Per-fine-position tag: 'F', 'M' or 'C'."""
        tags = np.full(len(self.b_f), "F")
        tags[np.repeat(self.b_m, 2) == 1] = "M"
        tags[np.repeat(self.b_c, 4) == 1] = "C"
        return tags

    @classmethod
    def all_fine(cls, num_fine: int) -> "GranularityMasks":
        return cls(np.ones(num_fine), np.zeros(num_fine // 2), np.zeros(num_fine // 4))


def _round_count(x: float) -> int:
    # half-up, after removing float noise such as 0.3 * 20 = 6.000000000000001
    return int(math.floor(round(x, 9) + 0.5))


def _lowest(values: np.ndarray, candidates: np.ndarray, k: int) -> np.ndarray:
    """Indices (from ``candidates``) of the ``k`` smallest values, ties to smaller index."""
    order = np.argsort(values[candidates], kind="stable")
    return candidates[order[:k]]


def allocate_masks(tracks: EntropyTracks, ratios: GranularityRatios) -> GranularityMasks:
    n_f, n_m, n_c = len(tracks.h_f), len(tracks.h_m), len(tracks.h_c)
    if n_f % 4 or not n_f == 2 * n_m == 4 * n_c:
        raise ShapeError(f"inconsistent track lengths {n_f}, {n_m}, {n_c}")

    k_c = min(_round_count(ratios.r_c * n_c), n_c)
    b_c = np.zeros(n_c, dtype=np.int8)
    b_c[_lowest(tracks.h_c, np.arange(n_c), k_c)] = 1

    candidates = np.flatnonzero(np.repeat(b_c, 2) == 0)
    k_m = min(_round_count(ratios.r_m * n_m), len(candidates))
    b_m = np.zeros(n_m, dtype=np.int8)
    b_m[_lowest(tracks.h_m, candidates, k_m)] = 1

    b_f = 1 - np.repeat(b_m, 2) - np.repeat(b_c, 4)
    return GranularityMasks(b_f, b_m, b_c)


def average_frame_rate(ratios: GranularityRatios, base_rate: float) -> float:
    """Frames per second when spans follow the ratios: F * (r_f + r_m/2 + r_c/4)."""
    return base_rate * math.fsum((4 * ratios.r_f, 2 * ratios.r_m, ratios.r_c)) / 4


def ratios_for_target(target: float, base_rate: float, policy: MixPolicy | str) -> GranularityRatios:
    """Two-level mix whose average frame rate equals ``target``."""
    policy = MixPolicy(policy)
    if not base_rate / 4 <= target <= base_rate:
        raise InfeasibleTargetError(f"target {target} Hz outside [{base_rate / 4}, {base_rate}] Hz")
    if target == base_rate:
        return GranularityRatios(1.0, 0.0, 0.0)
    t = target / base_rate
    if policy is MixPolicy.FINE_COARSE:
        lo, hi = 0.25, 1.0
    elif policy is MixPolicy.FINE_MEDIUM:
        lo, hi = 0.5, 1.0
    else:
        lo, hi = 0.25, 0.5
    if not lo <= t <= hi:
        raise InfeasibleTargetError(
            f"target {target} Hz outside the {policy.value} range [{lo * base_rate}, {hi * base_rate}] Hz"
        )
    # the higher-rate component's share, interpolating linearly in rate
    share = (t - lo) / (hi - lo)
    if policy is MixPolicy.FINE_COARSE:
        return GranularityRatios(share, 0.0, 1.0 - share)
    if policy is MixPolicy.FINE_MEDIUM:
        return GranularityRatios(share, 1.0 - share, 0.0)
    return GranularityRatios(0.0, share, 1.0 - share)


@dataclass(frozen=True)
class MaskReport:
    fine_frames: int
    medium_frames: int
    coarse_frames: int
    total_frames: int
    fine_positions: int
    duration: float
    realized_rate: float
    span_fractions: tuple[float, float, float]  # (fine, medium, coarse)


def mask_statistics(masks: GranularityMasks, base_rate: float) -> MaskReport:
    k_f, k_m, k_c = masks.counts
    t = masks.num_fine_positions
    total = k_f + k_m + k_c
    duration = t / base_rate
    return MaskReport(
        fine_frames=k_f,
        medium_frames=k_m,
        coarse_frames=k_c,
        total_frames=total,
        fine_positions=t,
        duration=duration,
        realized_rate=total * base_rate / t if t else 0.0,
        span_fractions=(k_f / t, 2 * k_m / t, 4 * k_c / t) if t else (0.0, 0.0, 0.0),
    )
