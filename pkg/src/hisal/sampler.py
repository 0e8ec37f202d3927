"""Attention-guided patch sampling over a coarse saliency map.

The coarse map is quantized to bytes and pixels whose byte value falls
strictly between two thresholds are marked *uncertain*; those pixels form
the attention map. Square crop regions are then planned so every uncertain
pixel lands inside at least one region:

1. Columns are scanned across the horizontal span of the uncertain pixels.
   The column count grows with the span, plus a fixed number of extra
   columns so neighbouring crops overlap.
2. Each scanned column gets a jittered crop size, and crop centers are
   chosen greedily down the column so the chosen crops cover every
   uncertain pixel in it.
3. An optional repair pass emits fixed-size crops for any uncertain pixel
   the column scan left uncovered, so coverage holds unconditionally.

Crops that would stick out of the image are shifted back inside, never
shrunk, unless the image itself is smaller than the crop.

Randomness comes from a self-contained SplitMix64 sequence so identical
inputs produce byte-identical samples on any platform or process layout.
"""

from __future__ import annotations

import math
from bisect import bisect_right
from dataclasses import dataclass
from enum import Enum
from pathlib import Path

import numpy as np

from .raster import BinaryMask, RasterImage, Region, SaliencyMap, byte_scale, crop, save_image, save_map

__all__ = [
    "SplitMix64",
    "SamplerConfig",
    "AttentionMap",
    "PatchOrigin",
    "PatchSample",
    "ColumnPlan",
    "build_attention_map",
    "column_plan",
    "sample_patches",
    "export_training_patches",
]

_MASK64 = (1 << 64) - 1


class SplitMix64:
    """SplitMix64 generator; fixed here so sampling replays bit-for-bit.

    The state update adds the 64-bit golden-ratio constant and the output
    mix is the standard two-multiply finalizer, matching the published
    test vectors (seed 0 yields 0xE220A8397B1DCDAF first).
    """

    def __init__(self, seed: int) -> None:
        self._state = seed & _MASK64

    def next_u64(self) -> int:
        self._state = (self._state + 0x9E3779B97F4A7C15) & _MASK64
        z = self._state
        z = ((z ^ (z >> 30)) * 0xBF58476D1CE4E5B9) & _MASK64
        z = ((z ^ (z >> 27)) * 0x94D049BB133111EB) & _MASK64
        return z ^ (z >> 31)

    def randint(self, lo: int, hi: int) -> int:
        """Uniform integer in ``[lo, hi]`` via modulo reduction.

        Modulo bias is below 2**-57 for the spans used here and keeping
        the reduction trivial makes the stream easy to reproduce in other
        languages.
        """
        if hi < lo:
            raise ValueError(f"empty range [{lo}, {hi}]")
        return lo + self.next_u64() % (hi - lo + 1)


@dataclass(frozen=True)
class SamplerConfig:
    """Knobs for attention thresholds and patch planning.

    Attributes:
        base_size: Nominal square crop side in pixels.
        extra_columns: Additional scan columns beyond the minimum needed
            to tile the uncertain span, forcing horizontal overlap.
        low_threshold: Byte value; pixels must be strictly above it.
        high_threshold: Byte value; pixels must be strictly below it.
        jitter: Maximum magnitude of the per-column crop size offset.
        seed: 64-bit seed for the jitter sequence.
        coverage_repair: Emit fixed-size crops for pixels the column scan
            missed, guaranteeing full coverage.
    """

    base_size: int = 384
    extra_columns: int = 5
    low_threshold: int = 50
    high_threshold: int = 200
    jitter: int = 64
    seed: int = 0
    coverage_repair: bool = True

    def __post_init__(self) -> None:
        if self.base_size < 1:
            raise ValueError(f"base_size must be positive, got {self.base_size}")
        if self.extra_columns < 0:
            raise ValueError(f"extra_columns must be >= 0, got {self.extra_columns}")
        if not 0 <= self.low_threshold <= 255 or not 0 <= self.high_threshold <= 255:
            raise ValueError("thresholds must be byte values in [0, 255]")
        if self.low_threshold >= self.high_threshold:
            raise ValueError(
                f"low_threshold must be below high_threshold, got "
                f"{self.low_threshold} >= {self.high_threshold}"
            )
        if not 0 <= self.jitter < self.base_size:
            raise ValueError(f"jitter must lie in [0, base_size), got {self.jitter}")
        if not 0 <= self.seed <= _MASK64:
            raise ValueError("seed must fit in 64 bits")


class AttentionMap(BinaryMask):
    """Binary grid marking the uncertain pixels of a coarse map."""


class PatchOrigin(Enum):
    COLUMN_SCAN = "column-scan"
    COVERAGE_REPAIR = "coverage-repair"


@dataclass(frozen=True)
class PatchSample:
    """One planned crop.

    ``column_index`` is the 1-based scan column that produced the crop and
    0 for coverage-repair crops. ``center`` is the uncertain pixel the crop
    was centered on before shift-clamping.
    """

    region: Region
    column_index: int
    center: tuple[int, int]
    origin: PatchOrigin


@dataclass(frozen=True)
class ColumnPlan:
    """Scan-column arithmetic for an uncertain span of width ``span``."""

    span: int
    column_count: int
    stride: int
    xs: tuple[int, ...]


def build_attention_map(coarse: SaliencyMap, cfg: SamplerConfig) -> AttentionMap:
    """Mark pixels whose byte value lies strictly between the thresholds."""
    levels = byte_scale(coarse)
    uncertain = (levels > cfg.low_threshold) & (levels < cfg.high_threshold)
    return AttentionMap(uncertain.astype(np.uint8))


def column_plan(x_left: int, x_right: int, cfg: SamplerConfig) -> ColumnPlan:
    """Plan scan columns across the inclusive span ``[x_left, x_right]``.

    The column count is ``ceil(span / base_size) + extra_columns`` and one
    more column is scanned than that count, with positions advancing by
    ``ceil(span / count)`` and capping at ``x_right``.
    """
    if x_right < x_left:
        raise ValueError(f"empty span [{x_left}, {x_right}]")
    span = x_right - x_left + 1
    count = math.ceil(span / cfg.base_size) + cfg.extra_columns
    stride = math.ceil(span / count)
    xs = tuple(min(x_left + (t - 1) * stride, x_right) for t in range(1, count + 2))
    return ColumnPlan(span=span, column_count=count, stride=stride, xs=xs)


def _clamp_axis(center: int, side: int, extent: int) -> tuple[int, int]:
    """Place a ``side``-long interval around ``center`` inside ``[0, extent)``.

    The interval is shifted, not shrunk; only an extent smaller than the
    side truncates it to the full axis.
    """
    size = min(side, extent)
    pos = min(max(center - side // 2, 0), extent - size)
    return pos, size


def _square_region(cx: int, cy: int, side: int, width: int, height: int) -> Region:
    x, w = _clamp_axis(cx, side, width)
    y, h = _clamp_axis(cy, side, height)
    return Region(x, y, w, h)


def _column_centers(ys: np.ndarray, side: int, height: int) -> list[int]:
    """Greedy minimal cover of the uncertain rows ``ys`` (sorted ascending).

    Repeatedly takes the topmost uncovered row, centers a crop on the
    lowest uncertain row that still covers it, and skips every row the
    clamped crop covers. Each chosen crop always contains its target row,
    so the loop strictly advances.
    """
    rows = ys.tolist()
    centers: list[int] = []
    i = 0
    while i < len(rows):
        target = rows[i]
        j = bisect_right(rows, target + side // 2, lo=i) - 1
        center = rows[j]
        centers.append(center)
        top, size = _clamp_axis(center, side, height)
        i = bisect_right(rows, top + size - 1, lo=i)
    return centers


def sample_patches(
    attention: AttentionMap,
    image_width: int,
    image_height: int,
    cfg: SamplerConfig,
) -> list[PatchSample]:
    """Plan crop regions so every uncertain pixel is inside at least one.

    The attention grid must match the image dimensions. An all-zero grid
    yields an empty plan. One jitter value is drawn per scan column index,
    including repeats of a capped column, so the random stream depends only
    on the seed and the column count; repeated columns are processed once.
    """
    if (attention.width, attention.height) != (image_width, image_height):
        raise ValueError(
            f"attention grid {attention.width}x{attention.height} does not match "
            f"image {image_width}x{image_height}"
        )
    grid = attention.data
    occupied_cols = np.flatnonzero(grid.any(axis=0))
    if occupied_cols.size == 0:
        return []

    plan = column_plan(int(occupied_cols[0]), int(occupied_cols[-1]), cfg)
    rng = SplitMix64(cfg.seed)
    covered = np.zeros(grid.shape, dtype=bool)
    samples: list[PatchSample] = []
    seen: set[int] = set()

    for t, x_t in enumerate(plan.xs, start=1):
        side = cfg.base_size + rng.randint(-cfg.jitter, cfg.jitter)
        if x_t in seen:
            continue
        seen.add(x_t)
        ys = np.flatnonzero(grid[:, x_t])
        if ys.size == 0:
            continue
        for cy in _column_centers(ys, side, image_height):
            region = _square_region(x_t, cy, side, image_width, image_height)
            samples.append(
                PatchSample(region, t, (int(x_t), int(cy)), PatchOrigin.COLUMN_SCAN)
            )
            covered[region.y : region.y + region.h, region.x : region.x + region.w] = True

    if cfg.coverage_repair:
        for x in occupied_cols:
            col_rows = np.flatnonzero(grid[:, x])
            missed = col_rows[~covered[col_rows, x]]
            while missed.size:
                cy = int(missed[0])
                region = _square_region(int(x), cy, cfg.base_size, image_width, image_height)
                samples.append(
                    PatchSample(region, 0, (int(x), cy), PatchOrigin.COVERAGE_REPAIR)
                )
                covered[region.y : region.y + region.h, region.x : region.x + region.w] = True
                missed = missed[~covered[missed, x]]

    return samples


def export_training_patches(
    image: RasterImage,
    labels: BinaryMask,
    samples: list[PatchSample],
    out_dir: str | Path,
) -> int:
    """Write image/label crop pairs for each sample; returns the pair count.

    Crops land in ``images/`` and ``gt/`` subdirectories with matching
    stems, forming a paired-layout dataset of their own.
    """
    if (image.width, image.height) != (labels.width, labels.height):
        raise ValueError(
            f"image {image.width}x{image.height} does not match labels "
            f"{labels.width}x{labels.height}"
        )
    out_dir = Path(out_dir)
    img_dir = out_dir / "images"
    gt_dir = out_dir / "gt"
    img_dir.mkdir(parents=True, exist_ok=True)
    gt_dir.mkdir(parents=True, exist_ok=True)
    for idx, sample in enumerate(samples):
        stem = f"patch_{idx:05d}"
        save_image(img_dir / f"{stem}.png", crop(image, sample.region))
        label_crop = crop(labels, sample.region)
        save_map(gt_dir / f"{stem}.png", SaliencyMap(label_crop.data.astype(np.float64)))
    return len(samples)
