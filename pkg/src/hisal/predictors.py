"""Coarse predictors, patch refiners, and their process bindings.

Both prediction stages run at a fixed working resolution. The coarse stage
downsamples the full image to ``work_size`` square, predicts, and
upsamples the map back to the input size. The refinement stage crops the
image and the coarse map at each sampled region, warps both crops to
``work_size`` square, refines, and warps the result back to the region.

Models are either built-in numpy baselines or out-of-process adapters
spoken to over the frame protocol (see :mod:`hisal.protocol`). Built-ins:

* ``baseline-contrast`` coarse: distance between each blurred pixel color
  and the image mean color, min-max normalized; flat images yield zeros.
* ``identity`` refiner: returns its guidance unchanged. Because nothing
  is recomputed, the warp to working resolution is skipped entirely and
  the output is the untouched guidance crop.
* ``local-contrast`` refiner: min-max stretches the guidance, blended in
  proportionally to local image gradient strength (see
  :class:`LocalContrastRefiner` for the exact formula).
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Protocol

import numpy as np
from scipy.ndimage import gaussian_filter

from .protocol import (
    ROLE_COARSE,
    ROLE_REFINE,
    Frame,
    ProtocolError,
    SidecarChannel,
    image_frame,
    map_frame,
)
from .raster import RasterImage, Region, SaliencyMap, crop, luminance, resize
from .sampler import PatchSample

__all__ = [
    "PredictorError",
    "CoarseModel",
    "RefineModel",
    "ContrastCoarseModel",
    "IdentityRefiner",
    "LocalContrastRefiner",
    "SidecarCoarseModel",
    "SidecarRefiner",
    "PredictorBinding",
    "ResolvedPredictors",
    "GuidedPatch",
    "run_coarse",
    "prepare_guided_patches",
    "run_refine_batch",
]

_BLUR_SIGMA = 2.0


class PredictorError(RuntimeError):
    """A predictor backend failed; ``endpoint`` names the failing backend."""

    def __init__(self, message: str, endpoint: str) -> None:
        super().__init__(f"{message} (endpoint: {endpoint})")
        self.endpoint = endpoint


class CoarseModel(Protocol):
    def predict(self, image: RasterImage) -> SaliencyMap: ...


class RefineModel(Protocol):
    def refine(self, patch: RasterImage, guidance: SaliencyMap) -> SaliencyMap: ...


class ContrastCoarseModel:
    """Color-contrast-to-mean heuristic.

    Saliency is the Euclidean distance between the Gaussian-blurred color
    of each pixel and the global mean color, min-max normalized to
    ``[0, 1]``. An image with no contrast anywhere (all distances equal)
    maps to all zeros.
    """

    def predict(self, image: RasterImage) -> SaliencyMap:
        rgb = image.data.astype(np.float64) / 255.0
        blurred = gaussian_filter(rgb, sigma=(_BLUR_SIGMA, _BLUR_SIGMA, 0.0), mode="nearest")
        mean_color = rgb.reshape(-1, 3).mean(axis=0)
        dist = np.sqrt(((blurred - mean_color) ** 2).sum(axis=2))
        span = dist.max() - dist.min()
        if span <= 0.0:
            return SaliencyMap(np.zeros(dist.shape))
        return SaliencyMap((dist - dist.min()) / span)


class IdentityRefiner:
    """Returns the guidance unchanged; used as the no-op refinement stage."""

    is_identity = True

    def refine(self, patch: RasterImage, guidance: SaliencyMap) -> SaliencyMap:
        return guidance


class LocalContrastRefiner:
    """Gradient-gated min-max stretch of the guidance.

    With guidance ``g``, per-pixel gradient magnitude ``m`` of the patch
    luminance (central differences), and ``s`` the min-max stretch of
    ``g`` (or ``g`` itself when it is constant), the output is::

        out = clip(g + (m / max(m)) * (s - g), 0, 1)

    so flat image areas keep the guidance and strong edges pull values
    toward the stretched map. A patch with no gradients anywhere, or a
    constant guidance, passes through unchanged.
    """

    def refine(self, patch: RasterImage, guidance: SaliencyMap) -> SaliencyMap:
        if (patch.width, patch.height) != (guidance.width, guidance.height):
            raise ValueError(
                f"patch {patch.width}x{patch.height} does not match guidance "
                f"{guidance.width}x{guidance.height}"
            )
        g = guidance.data
        lum = luminance(patch)
        if lum.shape[0] > 1 and lum.shape[1] > 1:
            gy, gx = np.gradient(lum)
            mag = np.hypot(gx, gy)
        else:
            mag = np.zeros_like(lum)
        peak = mag.max()
        gate = mag / peak if peak > 0.0 else np.zeros_like(mag)
        span = g.max() - g.min()
        stretched = (g - g.min()) / span if span > 0.0 else g
        return SaliencyMap(np.clip(g + gate * (stretched - g), 0.0, 1.0))


class SidecarCoarseModel:
    """Coarse predictions served by an adapter over the frame protocol."""

    def __init__(self, channel: SidecarChannel) -> None:
        self._channel = channel

    def predict(self, image: RasterImage) -> SaliencyMap:
        request = [image_frame(ROLE_COARSE, image)]
        try:
            return self._channel.request_map(request, image.width, image.height)
        except ProtocolError as err:
            raise PredictorError(str(err), self._channel.endpoint) from err


class SidecarRefiner:
    """Patch refinement served by an adapter over the frame protocol."""

    def __init__(self, channel: SidecarChannel) -> None:
        self._channel = channel

    def refine(self, patch: RasterImage, guidance: SaliencyMap) -> SaliencyMap:
        request: list[Frame] = [
            image_frame(ROLE_REFINE, patch),
            map_frame(ROLE_REFINE, guidance),
        ]
        try:
            return self._channel.request_map(request, patch.width, patch.height)
        except ProtocolError as err:
            raise PredictorError(str(err), self._channel.endpoint) from err


_COARSE_NAMES = ("baseline-contrast", "baseline")
_REFINER_NAMES = ("identity", "local-contrast")
_SIDECAR_PREFIX = "sidecar:"


@dataclass
class ResolvedPredictors:
    """Live model pair plus the channels that must be closed afterwards."""

    coarse: CoarseModel
    refiner: RefineModel
    work_size: int
    channels: list[SidecarChannel] = field(default_factory=list)

    def close(self) -> None:
        for channel in self.channels:
            channel.close()
        self.channels.clear()

    def __enter__(self) -> "ResolvedPredictors":
        return self

    def __exit__(self, *exc) -> None:
        self.close()


@dataclass(frozen=True)
class PredictorBinding:
    """Names the coarse predictor and refiner backing a pipeline run.

    ``coarse`` is ``"baseline-contrast"`` or ``"sidecar:ENDPOINT"``;
    ``refiner`` is ``"identity"``, ``"local-contrast"``, or
    ``"sidecar:ENDPOINT"``. An endpoint is a command line to spawn or a
    ``HOST:PORT`` to connect to. Sidecar endpoints are spawned/connected
    (and thus validated) when the binding is resolved, not per request.
    """

    coarse: str = "baseline-contrast"
    refiner: str = "identity"
    work_size: int = 384
    timeout: float = 30.0

    def __post_init__(self) -> None:
        if self.work_size < 1:
            raise ValueError(f"work_size must be positive, got {self.work_size}")
        if self.timeout <= 0:
            raise ValueError(f"timeout must be positive, got {self.timeout}")
        for label, value, names in (
            ("coarse", self.coarse, _COARSE_NAMES),
            ("refiner", self.refiner, _REFINER_NAMES),
        ):
            if value not in names and not value.startswith(_SIDECAR_PREFIX):
                raise ValueError(
                    f"unknown {label} predictor {value!r}; expected one of "
                    f"{', '.join(names)} or sidecar:ENDPOINT"
                )
            if value.startswith(_SIDECAR_PREFIX) and not value[len(_SIDECAR_PREFIX):].strip():
                raise ValueError(f"{label} sidecar endpoint is empty")

    def resolve(self) -> ResolvedPredictors:
        """Instantiate the models, spawning/connecting sidecars up front."""
        channels: list[SidecarChannel] = []
        try:
            if self.coarse.startswith(_SIDECAR_PREFIX):
                endpoint = self.coarse[len(_SIDECAR_PREFIX):].strip()
                try:
                    channel = SidecarChannel(endpoint, timeout=self.timeout)
                except ProtocolError as err:
                    raise PredictorError(str(err), endpoint) from err
                channels.append(channel)
                coarse: CoarseModel = SidecarCoarseModel(channel)
            else:
                coarse = ContrastCoarseModel()
            if self.refiner.startswith(_SIDECAR_PREFIX):
                endpoint = self.refiner[len(_SIDECAR_PREFIX):].strip()
                try:
                    channel = SidecarChannel(endpoint, timeout=self.timeout)
                except ProtocolError as err:
                    raise PredictorError(str(err), endpoint) from err
                channels.append(channel)
                refiner: RefineModel = SidecarRefiner(channel)
            elif self.refiner == "local-contrast":
                refiner = LocalContrastRefiner()
            else:
                refiner = IdentityRefiner()
        except PredictorError:
            for channel in channels:
                channel.close()
            raise
        return ResolvedPredictors(coarse, refiner, self.work_size, channels)


@dataclass(frozen=True)
class GuidedPatch:
    """One refinement work item.

    ``image_patch`` and ``guidance`` are warped to the working resolution;
    ``native_guidance`` is the untouched guidance crop at the region's own
    size, kept so identity refinement can skip the warp round trip.
    """

    image_patch: RasterImage
    guidance: SaliencyMap
    region: Region
    native_guidance: SaliencyMap


def _check_map_dims(result: SaliencyMap, width: int, height: int, stage: str) -> None:
    if (result.width, result.height) != (width, height):
        raise ValueError(
            f"{stage} returned {result.width}x{result.height}, expected {width}x{height}"
        )


def run_coarse(image: RasterImage, predictors: ResolvedPredictors) -> SaliencyMap:
    """Predict a full-image coarse map at the image's own dimensions.

    An image already at the working resolution is fed through untouched,
    so no resample round trip degrades it.
    """
    work = predictors.work_size
    if (image.width, image.height) == (work, work):
        result = predictors.coarse.predict(image)
        _check_map_dims(result, work, work, "coarse predictor")
        return result
    small = resize(image, work, work)
    result = predictors.coarse.predict(small)
    _check_map_dims(result, work, work, "coarse predictor")
    return resize(result, image.width, image.height)


def prepare_guided_patches(
    image: RasterImage,
    coarse: SaliencyMap,
    samples: list[PatchSample],
    work_size: int,
) -> list[GuidedPatch]:
    """Crop image and coarse map at each sample and warp both to work size.

    Image and map crops always share the identical region. Regions already
    at ``work_size`` square are passed through without resampling.
    """
    if (image.width, image.height) != (coarse.width, coarse.height):
        raise ValueError(
            f"coarse map {coarse.width}x{coarse.height} does not match image "
            f"{image.width}x{image.height}"
        )
    patches: list[GuidedPatch] = []
    for sample in samples:
        region = sample.region
        image_crop = crop(image, region)
        guidance_crop = crop(coarse, region)
        if (region.w, region.h) == (work_size, work_size):
            patches.append(GuidedPatch(image_crop, guidance_crop, region, guidance_crop))
        else:
            patches.append(
                GuidedPatch(
                    resize(image_crop, work_size, work_size),
                    resize(guidance_crop, work_size, work_size),
                    region,
                    guidance_crop,
                )
            )
    return patches


def run_refine_batch(
    patches: list[GuidedPatch],
    predictors: ResolvedPredictors,
) -> list[tuple[Region, SaliencyMap]]:
    """Refine each patch and warp results back to their regions' sizes.

    The batch aborts on the first failure. Identity refiners return the
    native guidance crop directly (no warp round trip), which keeps the
    identity pipeline an exact no-op.
    """
    refiner = predictors.refiner
    work = predictors.work_size
    results: list[tuple[Region, SaliencyMap]] = []
    if getattr(refiner, "is_identity", False):
        for patch in patches:
            results.append((patch.region, patch.native_guidance))
        return results
    for patch in patches:
        refined = refiner.refine(patch.image_patch, patch.guidance)
        _check_map_dims(refined, work, work, "refiner")
        region = patch.region
        if (region.w, region.h) != (work, work):
            refined = resize(refined, region.w, region.h)
        results.append((region, refined))
    return results
