"""End-to-end coarse-to-fine pipeline for a single image.

Stages: coarse prediction at working resolution, attention map over the
uncertain pixels, patch planning, guided refinement of each patch, fusion
with overlap averaging, and an optional consistency pass. Intermediates
are kept on the result so callers can inspect or export them.
"""

from __future__ import annotations

import time
from dataclasses import dataclass

from .fusion import ConsistencyMode, FusionPolicy, apply_consistency, fuse
from .predictors import (
    PredictorBinding,
    ResolvedPredictors,
    prepare_guided_patches,
    run_coarse,
    run_refine_batch,
)
from .raster import RasterImage, SaliencyMap, resize
from .sampler import AttentionMap, PatchSample, SamplerConfig, build_attention_map, sample_patches

__all__ = ["PipelineResult", "run_pipeline"]


@dataclass(frozen=True)
class PipelineResult:
    """Final map plus every intermediate of one pipeline run.

    ``timings_ms`` holds wall-clock stage durations keyed by
    ``coarse_ms``, ``sample_ms``, ``refine_ms``, ``fuse_ms``, ``total_ms``.
    """

    final: SaliencyMap
    coarse: SaliencyMap
    attention: AttentionMap
    samples: list[PatchSample]
    timings_ms: dict[str, float]


def _full_image_consistency(
    image: RasterImage,
    fused: SaliencyMap,
    predictors: ResolvedPredictors,
    size: int,
) -> SaliencyMap:
    """Run the refiner over the whole image as a consistency pass.

    Image and map are warped to ``size`` square for the backend and the
    result is warped back. An identity refiner would only add a resample
    round trip, so it short-circuits to the fused map itself.
    """
    if getattr(predictors.refiner, "is_identity", False):
        return fused
    warped_image = resize(image, size, size)
    warped_map = resize(fused, size, size)
    refined = predictors.refiner.refine(warped_image, warped_map)
    return resize(refined, image.width, image.height)


def run_pipeline(
    image: RasterImage,
    sampler_cfg: SamplerConfig,
    policy: FusionPolicy,
    predictors: ResolvedPredictors | PredictorBinding,
) -> PipelineResult:
    """Run the full coarse-to-fine pipeline on one image.

    ``predictors`` may be a live :class:`ResolvedPredictors` (reused across
    images) or a binding, which is resolved for this call and closed after.
    """
    if isinstance(predictors, PredictorBinding):
        with predictors.resolve() as models:
            return run_pipeline(image, sampler_cfg, policy, models)

    started = time.perf_counter()
    coarse = run_coarse(image, predictors)
    coarse_done = time.perf_counter()

    attention = build_attention_map(coarse, sampler_cfg)
    samples = sample_patches(attention, image.width, image.height, sampler_cfg)
    sample_done = time.perf_counter()

    patches = prepare_guided_patches(image, coarse, samples, predictors.work_size)
    refined = run_refine_batch(patches, predictors)
    refine_done = time.perf_counter()

    fused = fuse(coarse, attention, refined, policy)
    if policy.consistency is ConsistencyMode.SIDECAR_REFINE:
        final = _full_image_consistency(image, fused, predictors, policy.consistency_size)
    else:
        final = apply_consistency(image, fused, policy)
    finished = time.perf_counter()

    timings = {
        "coarse_ms": (coarse_done - started) * 1000.0,
        "sample_ms": (sample_done - coarse_done) * 1000.0,
        "refine_ms": (refine_done - sample_done) * 1000.0,
        "fuse_ms": (finished - refine_done) * 1000.0,
        "total_ms": (finished - started) * 1000.0,
    }
    return PipelineResult(final, coarse, attention, samples, timings)
