"""hisal: coarse-to-fine high-resolution salient object detection.

A coarse full-image prediction marks uncertain pixels, square patches are
sampled to cover them, each patch is refined at working resolution under
guidance of the coarse map, and the refined patches are fused back with
overlap averaging. A full evaluation suite (MAE, adaptive F-measure, PR
curves, structure measure, boundary displacement error) and a benchmark
harness with a CLI sit alongside the pipeline.
"""

from .dataset import DatasetManifest, DatasetPair, load_dataset
from .fusion import ConsistencyMode, FusionMode, FusionPolicy, apply_consistency, fuse
from .harness import (
    EvalResult,
    RunConfig,
    build_run_config,
    evaluate_and_report,
    evaluate_prediction_dir,
)
from .metrics import (
    MetricConfig,
    MetricReport,
    PRCurve,
    UndefinedMetricError,
    bde,
    binarize_map,
    compute_report,
    f_beta_adaptive,
    mae,
    pr_curve,
    s_measure,
)
from .pipeline import PipelineResult, run_pipeline
from .predictors import (
    ContrastCoarseModel,
    GuidedPatch,
    IdentityRefiner,
    LocalContrastRefiner,
    PredictorBinding,
    PredictorError,
    ResolvedPredictors,
    prepare_guided_patches,
    run_coarse,
    run_refine_batch,
)
from .raster import (
    BinaryMask,
    RasterImage,
    Region,
    SaliencyMap,
    byte_scale,
    crop,
    load_image,
    load_map,
    load_mask,
    luminance,
    map_from_bytes,
    paste,
    resize,
    save_image,
    save_map,
)
from .report import ReportRow
from .sampler import (
    AttentionMap,
    ColumnPlan,
    PatchOrigin,
    PatchSample,
    SamplerConfig,
    SplitMix64,
    build_attention_map,
    column_plan,
    export_training_patches,
    sample_patches,
)

__version__ = "0.1.0"
