"""Fusing refined patches back into the coarse map.

Refined patch maps are accumulated into per-pixel sums and counts; pixels
covered by several patches take the plain average. The fusion mode picks
which pixels adopt the averaged value:

* ``replace-uncertain`` (default): only pixels that are both covered by a
  patch and marked uncertain in the attention map are replaced; everything
  else keeps the coarse value bit for bit.
* ``paste-all``: every covered pixel is replaced.

A consistency stage can smooth seams afterwards. The built-in option is a
joint bilateral filter: a uniform box window in space, Gaussian weights on
the luminance difference, normalized over the in-image window. On a
constant image every weight is 1, so the output reduces exactly to the
box average of the map over the in-image window. A third option delegates
to a full-image refine pass at a configured size (the seat for a learned
consistency model); the pipeline layer drives that one because it needs a
refiner backend.
"""

from __future__ import annotations

from dataclasses import dataclass
from enum import Enum

import numpy as np

from .raster import RasterImage, Region, SaliencyMap, luminance
from .sampler import AttentionMap

__all__ = [
    "FusionMode",
    "ConsistencyMode",
    "FusionPolicy",
    "fuse",
    "apply_consistency",
]


class FusionMode(Enum):
    REPLACE_UNCERTAIN = "replace-uncertain"
    PASTE_ALL = "paste-all"


class ConsistencyMode(Enum):
    NONE = "none"
    EDGE_AWARE_FILTER = "edge-aware-filter"
    SIDECAR_REFINE = "sidecar-refine"


_CONSISTENCY_ALIASES = {"edge-aware": ConsistencyMode.EDGE_AWARE_FILTER}


def _parse_enum(kind, value, aliases=None):
    if isinstance(value, kind):
        return value
    if aliases and value in aliases:
        return aliases[value]
    try:
        return kind(value)
    except ValueError:
        choices = ", ".join(member.value for member in kind)
        raise ValueError(f"unknown {kind.__name__} {value!r}; expected one of {choices}") from None


@dataclass(frozen=True)
class FusionPolicy:
    """How refined patches replace coarse pixels and get smoothed.

    ``consistency_size`` only matters for the ``sidecar-refine`` mode: the
    image and fused map are warped to that square size for the full-image
    pass. String values are accepted for the enums (``"edge-aware"`` is
    shorthand for the filter).
    """

    mode: FusionMode = FusionMode.REPLACE_UNCERTAIN
    consistency: ConsistencyMode = ConsistencyMode.NONE
    filter_radius: int = 8
    filter_edge_scale: float = 0.1
    consistency_size: int = 1024

    def __post_init__(self) -> None:
        object.__setattr__(self, "mode", _parse_enum(FusionMode, self.mode))
        object.__setattr__(
            self,
            "consistency",
            _parse_enum(ConsistencyMode, self.consistency, _CONSISTENCY_ALIASES),
        )
        if self.filter_radius < 1:
            raise ValueError(f"filter_radius must be positive, got {self.filter_radius}")
        if self.filter_edge_scale <= 0:
            raise ValueError(
                f"filter_edge_scale must be positive, got {self.filter_edge_scale}"
            )
        if self.consistency_size < 1:
            raise ValueError(
                f"consistency_size must be positive, got {self.consistency_size}"
            )


def fuse(
    coarse: SaliencyMap,
    attention: AttentionMap,
    refined: list[tuple[Region, SaliencyMap]],
    policy: FusionPolicy,
) -> SaliencyMap:
    """Average refined patches over their overlaps and blend into the coarse map.

    Pixels outside every region keep the coarse value exactly; with no
    refined patches the coarse map comes back unchanged. The result does
    not depend on patch order beyond float addition order (well below any
    metric tolerance).
    """
    if (attention.width, attention.height) != (coarse.width, coarse.height):
        raise ValueError(
            f"attention grid {attention.width}x{attention.height} does not match "
            f"coarse map {coarse.width}x{coarse.height}"
        )
    height, width = coarse.data.shape
    total = np.zeros((height, width), dtype=np.float64)
    count = np.zeros((height, width), dtype=np.int32)
    for region, patch in refined:
        if region.x + region.w > width or region.y + region.h > height:
            raise ValueError(f"region {region} exceeds map bounds {width}x{height}")
        if (patch.width, patch.height) != (region.w, region.h):
            raise ValueError(
                f"refined map {patch.width}x{patch.height} does not match region "
                f"{region.w}x{region.h}"
            )
        window = (slice(region.y, region.y + region.h), slice(region.x, region.x + region.w))
        total[window] += patch.data
        count[window] += 1

    replace = count > 0
    if policy.mode is FusionMode.REPLACE_UNCERTAIN:
        replace &= attention.data == 1
    out = coarse.data.copy()
    out[replace] = total[replace] / count[replace]
    return SaliencyMap(np.clip(out, 0.0, 1.0))


def apply_consistency(
    image: RasterImage,
    fused: SaliencyMap,
    policy: FusionPolicy,
) -> SaliencyMap:
    """Run the policy's local consistency stage over the fused map.

    ``none`` returns the input object untouched. ``edge-aware-filter``
    runs the joint bilateral filter described in the module docstring.
    The ``sidecar-refine`` mode is driven by the pipeline layer, which
    owns the refiner backend, so it is rejected here.
    """
    if policy.consistency is ConsistencyMode.NONE:
        return fused
    if policy.consistency is ConsistencyMode.SIDECAR_REFINE:
        raise ValueError(
            "sidecar-refine consistency requires a refiner backend; "
            "run it through the pipeline layer"
        )
    if (image.width, image.height) != (fused.width, fused.height):
        raise ValueError(
            f"image {image.width}x{image.height} does not match map "
            f"{fused.width}x{fused.height}"
        )
    lum = luminance(image)
    values = fused.data
    height, width = values.shape
    radius = policy.filter_radius
    inv_two_sigma_sq = 1.0 / (2.0 * policy.filter_edge_scale**2)
    numerator = np.zeros_like(values)
    denominator = np.zeros_like(values)
    for dy in range(-radius, radius + 1):
        ys0, ys1 = max(0, -dy), min(height, height - dy)
        if ys0 >= ys1:
            continue
        for dx in range(-radius, radius + 1):
            xs0, xs1 = max(0, -dx), min(width, width - dx)
            if xs0 >= xs1:
                continue
            out_win = (slice(ys0, ys1), slice(xs0, xs1))
            src_win = (slice(ys0 + dy, ys1 + dy), slice(xs0 + dx, xs1 + dx))
            diff = lum[out_win] - lum[src_win]
            weight = np.exp(-(diff * diff) * inv_two_sigma_sq)
            numerator[out_win] += weight * values[src_win]
            denominator[out_win] += weight
    return SaliencyMap(np.clip(numerator / denominator, 0.0, 1.0))
