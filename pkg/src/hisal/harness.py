"""Benchmark harness: run the pipeline over a dataset and write reports.

The harness resolves one predictor pair per worker thread (each sidecar
connection is owned by exactly one worker), evaluates images in parallel,
and emits into the output directory:

* ``report.csv``      deterministic per-image metrics
* ``timings.csv``     wall-clock stage timings (excluded from report.csv
                      so reruns stay byte-identical)
* ``summary.md``      aggregate table plus skip/failure lists
* ``pr/NAME.tsv``     per-image precision/recall points
* ``maps/NAME.png``   final saliency maps
* ``figures/*.png``   rendered PR curve and per-image scores

One image failing is recorded on its own row and never disturbs other
rows; the evaluation exit status reflects whether any row failed.
"""

from __future__ import annotations

import threading
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from pathlib import Path

from .config import coerce_bool, coerce_float, coerce_int
from .dataset import DatasetManifest, DatasetPair
from .fusion import FusionPolicy
from .metrics import MetricConfig, MetricReport, compute_report
from .pipeline import run_pipeline
from .predictors import PredictorBinding, ResolvedPredictors
from .raster import load_image, load_map, load_mask, save_map
from .report import (
    ReportRow,
    render_figures,
    write_pr_tsv,
    write_report_csv,
    write_summary_md,
    write_timings_csv,
)
from .sampler import SamplerConfig

__all__ = ["RunConfig", "EvalResult", "build_run_config", "evaluate_and_report", "evaluate_prediction_dir"]


@dataclass(frozen=True)
class RunConfig:
    """Typed configuration for a harness run."""

    sampler: SamplerConfig = SamplerConfig()
    binding: PredictorBinding = PredictorBinding()
    fusion: FusionPolicy = FusionPolicy()
    metrics: MetricConfig = MetricConfig()
    jobs: int = 1
    save_maps: bool = True

    def __post_init__(self) -> None:
        if self.jobs < 1:
            raise ValueError(f"jobs must be at least 1, got {self.jobs}")


# key -> (dataclass attribute path, coercion)
_CONFIG_KEYS = {
    "sampler.base_size": ("sampler", "base_size", coerce_int),
    "sampler.extra_columns": ("sampler", "extra_columns", coerce_int),
    "sampler.low_threshold": ("sampler", "low_threshold", coerce_int),
    "sampler.high_threshold": ("sampler", "high_threshold", coerce_int),
    "sampler.jitter": ("sampler", "jitter", coerce_int),
    "sampler.seed": ("sampler", "seed", coerce_int),
    "sampler.coverage_repair": ("sampler", "coverage_repair", coerce_bool),
    "predictor.coarse": ("binding", "coarse", None),
    "predictor.refiner": ("binding", "refiner", None),
    "predictor.work_size": ("binding", "work_size", coerce_int),
    "predictor.timeout": ("binding", "timeout", coerce_float),
    "fusion.mode": ("fusion", "mode", None),
    "fusion.consistency": ("fusion", "consistency", None),
    "fusion.filter_radius": ("fusion", "filter_radius", coerce_int),
    "fusion.filter_edge_scale": ("fusion", "filter_edge_scale", coerce_float),
    "fusion.consistency_size": ("fusion", "consistency_size", coerce_int),
    "metrics.beta_sq": ("metrics", "beta_sq", coerce_float),
    "metrics.pr_levels": ("metrics", "pr_levels", coerce_int),
    "metrics.s_alpha": ("metrics", "s_alpha", coerce_float),
    "metrics.bde_threshold": ("metrics", "bde_threshold", coerce_int),
    "run.jobs": (None, "jobs", coerce_int),
    "run.save_maps": (None, "save_maps", coerce_bool),
}


def build_run_config(entries: dict[str, str] | None = None, **overrides) -> RunConfig:
    """Build a RunConfig from raw config entries plus keyword overrides.

    ``entries`` holds raw strings from a config file; every key must be
    known. ``overrides`` are already-typed values keyed the same way but
    with dots replaced by underscores (e.g. ``sampler_seed=7``), applied
    after the file so command-line flags win.
    """
    groups: dict[str, dict] = {"sampler": {}, "binding": {}, "fusion": {}, "metrics": {}, None: {}}
    for key, raw in (entries or {}).items():
        if key not in _CONFIG_KEYS:
            raise ValueError(f"unknown config key {key!r}")
        group, attr, coerce = _CONFIG_KEYS[key]
        groups[group][attr] = coerce(key, raw) if coerce else raw
    for key, value in overrides.items():
        if value is None:
            continue
        dotted = key.replace("_", ".", 1)
        if dotted not in _CONFIG_KEYS:
            raise ValueError(f"unknown config override {key!r}")
        group, attr, _ = _CONFIG_KEYS[dotted]
        groups[group][attr] = value
    return RunConfig(
        sampler=SamplerConfig(**groups["sampler"]),
        binding=PredictorBinding(**groups["binding"]),
        fusion=FusionPolicy(**groups["fusion"]),
        metrics=MetricConfig(**groups["metrics"]),
        **groups[None],
    )


@dataclass(frozen=True)
class EvalResult:
    """Everything a caller needs after an evaluation run."""

    rows: list[ReportRow]
    skipped: tuple[str, ...]
    out_dir: Path

    @property
    def failed_rows(self) -> list[ReportRow]:
        return [row for row in self.rows if row.failed]

    @property
    def exit_code(self) -> int:
        return 1 if self.failed_rows else 0


def _metric_flags(report: MetricReport) -> tuple[str, ...]:
    flags = []
    if report.degenerate_gt:
        flags.append("gt-degenerate")
    if report.bde is None:
        flags.append("bde-undefined")
    return tuple(flags)


def _prepare_out_dir(out_dir: str | Path, save_maps: bool) -> Path:
    out = Path(out_dir)
    (out / "pr").mkdir(parents=True, exist_ok=True)
    (out / "figures").mkdir(parents=True, exist_ok=True)
    if save_maps:
        (out / "maps").mkdir(parents=True, exist_ok=True)
    return out


def _write_outputs(
    dataset_name: str,
    rows: list[ReportRow],
    skipped: tuple[str, ...],
    out: Path,
    with_timings: bool,
) -> None:
    write_report_csv(rows, out / "report.csv")
    if with_timings:
        write_timings_csv(rows, out / "timings.csv")
    write_summary_md(dataset_name, rows, skipped, out / "summary.md")
    render_figures(rows, out / "figures")


def evaluate_and_report(
    manifest: DatasetManifest,
    cfg: RunConfig,
    out_dir: str | Path,
    models: ResolvedPredictors | None = None,
) -> EvalResult:
    """Run the pipeline over every pair in the manifest and write reports.

    ``models`` injects pre-resolved predictors (shared across workers and
    left open afterwards); without it each worker thread resolves the
    binding once and the harness closes everything at the end. Results are
    ordered by the manifest regardless of the parallelism degree.
    """
    out = _prepare_out_dir(out_dir, cfg.save_maps)
    local = threading.local()
    owned: list[ResolvedPredictors] = []
    owned_lock = threading.Lock()

    def acquire_models() -> ResolvedPredictors:
        if models is not None:
            return models
        if not hasattr(local, "models"):
            resolved = cfg.binding.resolve()
            with owned_lock:
                owned.append(resolved)
            local.models = resolved
        return local.models

    def worker(pair: DatasetPair) -> ReportRow:
        try:
            image = load_image(pair.image_path)
            gt = load_mask(pair.gt_path)
            if (image.width, image.height) != (gt.width, gt.height):
                raise ValueError(
                    f"image {image.width}x{image.height} does not match ground "
                    f"truth {gt.width}x{gt.height}"
                )
            result = run_pipeline(image, cfg.sampler, cfg.fusion, acquire_models())
            report = compute_report(result.final, gt, cfg.metrics)
            if cfg.save_maps:
                save_map(out / "maps" / f"{pair.name}.png", result.final)
            write_pr_tsv(report.pr, out / "pr" / f"{pair.name}.tsv")
            return ReportRow(
                name=pair.name,
                mae=report.mae,
                f_beta=report.f_beta,
                s_measure=report.s_measure,
                bde=report.bde,
                patch_count=len(result.samples),
                flags=_metric_flags(report),
                pr=report.pr,
                timings_ms=result.timings_ms,
            )
        except Exception as err:  # per-image isolation: record, never propagate
            return ReportRow(name=pair.name, flags=(f"error: {err}",))

    try:
        if cfg.jobs == 1:
            rows = [worker(pair) for pair in manifest.pairs]
        else:
            with ThreadPoolExecutor(max_workers=cfg.jobs) as pool:
                rows = list(pool.map(worker, manifest.pairs))
    finally:
        for resolved in owned:
            resolved.close()

    _write_outputs(manifest.name, rows, manifest.skipped, out, with_timings=True)
    return EvalResult(rows=rows, skipped=manifest.skipped, out_dir=out)


def evaluate_prediction_dir(
    pred_dir: str | Path,
    gt_dir: str | Path,
    cfg: RunConfig,
    out_dir: str | Path,
) -> EvalResult:
    """Score stored prediction maps against masks, without running the pipeline.

    Predictions are PNG or PGM files paired with ``gt/NAME.png`` by stem.
    """
    pred_dir = Path(pred_dir)
    gt_dir = Path(gt_dir)
    if not pred_dir.is_dir():
        raise ValueError(f"prediction directory not found: {pred_dir}")
    if not gt_dir.is_dir():
        raise ValueError(f"ground-truth directory not found: {gt_dir}")
    preds = {
        path.stem: path
        for path in sorted(pred_dir.iterdir())
        if path.suffix.lower() in (".png", ".pgm") and path.is_file()
    }
    skipped: list[str] = []
    names: list[tuple[str, Path, Path]] = []
    for stem in sorted(preds):
        gt_path = gt_dir / f"{stem}.png"
        if gt_path.is_file():
            names.append((stem, preds[stem], gt_path))
        else:
            skipped.append(f"{stem}: ground-truth file missing: {gt_path}")
    for gt_path in sorted(gt_dir.glob("*.png")):
        if gt_path.stem not in preds:
            skipped.append(f"{gt_path.stem}: prediction has no file in {pred_dir}")
    if not names:
        raise ValueError(f"no prediction/ground-truth pairs between {pred_dir} and {gt_dir}")

    out = _prepare_out_dir(out_dir, save_maps=False)
    rows: list[ReportRow] = []
    for name, pred_path, gt_path in names:
        try:
            pred = load_map(pred_path)
            gt = load_mask(gt_path)
            report = compute_report(pred, gt, cfg.metrics)
            write_pr_tsv(report.pr, out / "pr" / f"{name}.tsv")
            rows.append(
                ReportRow(
                    name=name,
                    mae=report.mae,
                    f_beta=report.f_beta,
                    s_measure=report.s_measure,
                    bde=report.bde,
                    flags=_metric_flags(report),
                    pr=report.pr,
                )
            )
        except Exception as err:
            rows.append(ReportRow(name=name, flags=(f"error: {err}",)))

    _write_outputs(pred_dir.name, rows, tuple(skipped), out, with_timings=False)
    return EvalResult(rows=rows, skipped=tuple(skipped), out_dir=out)
