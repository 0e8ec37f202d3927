"""Harness configuration and dataset evaluation runs."""

from __future__ import annotations

import numpy as np
import pytest

from hisal.dataset import load_dataset
from hisal.fusion import ConsistencyMode, FusionMode
from hisal.harness import (
    RunConfig,
    build_run_config,
    evaluate_and_report,
    evaluate_prediction_dir,
)
from hisal.predictors import IdentityRefiner, ResolvedPredictors
from hisal.raster import RasterImage, SaliencyMap, luminance, save_image, save_map
from hisal.report import REPORT_COLUMNS
from hisal.sampler import SamplerConfig


class _ThresholdCoarse:
    """Predicts exactly the white-on-black object: 1.0 where the pixel is
    bright, 0.0 elsewhere. On such images the pipeline output equals the
    ground truth bit for bit."""

    def predict(self, image: RasterImage) -> SaliencyMap:
        return SaliencyMap((luminance(image) > 0.5).astype(np.float64))


def perfect_models(work_size: int = 384) -> ResolvedPredictors:
    return ResolvedPredictors(_ThresholdCoarse(), IdentityRefiner(), work_size)


def blob_mask(rng: np.random.Generator, h: int, w: int) -> np.ndarray:
    mask = np.zeros((h, w), dtype=bool)
    for _ in range(3):
        cy = rng.integers(h // 4, 3 * h // 4)
        cx = rng.integers(w // 4, 3 * w // 4)
        radius = rng.integers(min(h, w) // 10, min(h, w) // 4)
        yy, xx = np.ogrid[:h, :w]
        mask |= (yy - cy) ** 2 + (xx - cx) ** 2 <= radius**2
    return mask


def write_perfect_dataset(root, names, size=384):
    """White-object-on-black images whose ground truth is the object."""
    (root / "images").mkdir(parents=True)
    (root / "gt").mkdir(parents=True)
    for index, name in enumerate(names):
        rng = np.random.default_rng(1000 + index)
        mask = blob_mask(rng, size, size)
        data = np.zeros((size, size, 3), dtype=np.uint8)
        data[mask] = 255
        save_image(root / "images" / f"{name}.png", RasterImage(data))
        save_map(root / "gt" / f"{name}.png", SaliencyMap(mask.astype(np.float64)))


# ---------------------------------------------------------------- config


def test_build_run_config_defaults():
    cfg = build_run_config()
    assert cfg == RunConfig()
    assert cfg.jobs == 1 and cfg.save_maps is True


def test_build_run_config_from_entries():
    cfg = build_run_config(
        {
            "sampler.base_size": "128",
            "sampler.seed": "7",
            "sampler.coverage_repair": "off",
            "predictor.refiner": "local-contrast",
            "predictor.work_size": "96",
            "fusion.mode": "paste-all",
            "fusion.consistency": "edge-aware",
            "metrics.beta_sq": "0.5",
            "run.jobs": "3",
            "run.save_maps": "false",
        }
    )
    assert cfg.sampler.base_size == 128
    assert cfg.sampler.seed == 7
    assert cfg.sampler.coverage_repair is False
    assert cfg.binding.refiner == "local-contrast"
    assert cfg.binding.work_size == 96
    assert cfg.fusion.mode is FusionMode.PASTE_ALL
    assert cfg.fusion.consistency is ConsistencyMode.EDGE_AWARE_FILTER
    assert cfg.metrics.beta_sq == 0.5
    assert cfg.jobs == 3
    assert cfg.save_maps is False


def test_build_run_config_overrides_win():
    cfg = build_run_config({"sampler.seed": "7"}, sampler_seed=9, run_jobs=2, metrics_s_alpha=None)
    assert cfg.sampler.seed == 9
    assert cfg.jobs == 2
    assert cfg.metrics.s_alpha == 0.5  # None override is ignored


def test_build_run_config_rejects_unknown_keys():
    with pytest.raises(ValueError, match="unknown config key"):
        build_run_config({"sampler.bogus": "1"})
    with pytest.raises(ValueError, match="unknown config override"):
        build_run_config(sampler_bogus=1)
    with pytest.raises(ValueError, match="expected an integer"):
        build_run_config({"sampler.seed": "many"})
    with pytest.raises(ValueError, match="jobs must be at least 1"):
        build_run_config({"run.jobs": "0"})


# ------------------------------------------------------------ evaluation


@pytest.fixture(scope="module")
def perfect_dataset(tmp_path_factory):
    root = tmp_path_factory.mktemp("perfect")
    write_perfect_dataset(root, ["img_a", "img_b", "img_c"])
    return load_dataset(root)


def run_cfg(**overrides) -> RunConfig:
    base = dict(sampler=SamplerConfig(base_size=96, jitter=16, extra_columns=2))
    base.update(overrides)
    return RunConfig(**base)


def test_perfect_predictions_hit_ideal_scores(perfect_dataset, tmp_path):
    result = evaluate_and_report(
        perfect_dataset, run_cfg(), tmp_path / "out", models=perfect_models()
    )
    assert result.exit_code == 0
    assert [row.name for row in result.rows] == ["img_a", "img_b", "img_c"]
    for row in result.rows:
        assert not row.failed
        assert row.mae == 0.0
        assert row.f_beta == 1.0
        assert row.bde == 0.0
        assert row.s_measure == pytest.approx(1.0, abs=1e-9)
        assert row.patch_count == 0  # confident everywhere, nothing to refine


def test_output_tree_is_complete(perfect_dataset, tmp_path):
    out = tmp_path / "out"
    evaluate_and_report(perfect_dataset, run_cfg(), out, models=perfect_models())
    report = (out / "report.csv").read_text().splitlines()
    assert report[0] == ",".join(REPORT_COLUMNS)
    assert len(report) == 4
    assert report[1].startswith("img_a,0.00000000,1.00000000,1.00000000,0.00000000,0,")
    timing_lines = (out / "timings.csv").read_text().splitlines()
    assert timing_lines[0] == "image,coarse_ms,sample_ms,refine_ms,fuse_ms,total_ms"
    assert len(timing_lines) == 4
    summary = (out / "summary.md").read_text()
    assert "images evaluated: 3" in summary
    assert "images failed: 0" in summary
    for name in ("img_a", "img_b", "img_c"):
        assert (out / "maps" / f"{name}.png").is_file()
        tsv = (out / "pr" / f"{name}.tsv").read_text().splitlines()
        assert tsv[0] == "threshold\tprecision\trecall"
        assert len(tsv) == 257
    assert (out / "figures" / "pr_curve.png").is_file()
    assert (out / "figures" / "per_image.png").is_file()


def test_reruns_are_byte_identical(perfect_dataset, tmp_path):
    first = tmp_path / "first"
    second = tmp_path / "second"
    evaluate_and_report(perfect_dataset, run_cfg(), first, models=perfect_models())
    evaluate_and_report(perfect_dataset, run_cfg(), second, models=perfect_models())
    assert (first / "report.csv").read_bytes() == (second / "report.csv").read_bytes()
    assert (first / "summary.md").read_bytes() == (second / "summary.md").read_bytes()
    for name in ("img_a", "img_b", "img_c"):
        assert (first / "maps" / f"{name}.png").read_bytes() == (
            second / "maps" / f"{name}.png"
        ).read_bytes()
        assert (first / "pr" / f"{name}.tsv").read_bytes() == (
            second / "pr" / f"{name}.tsv"
        ).read_bytes()


def test_parallel_run_matches_sequential(perfect_dataset, tmp_path):
    sequential = tmp_path / "seq"
    parallel = tmp_path / "par"
    evaluate_and_report(perfect_dataset, run_cfg(jobs=1), sequential, models=perfect_models())
    evaluate_and_report(perfect_dataset, run_cfg(jobs=3), parallel, models=perfect_models())
    assert (sequential / "report.csv").read_bytes() == (parallel / "report.csv").read_bytes()


def test_save_maps_can_be_disabled(perfect_dataset, tmp_path):
    out = tmp_path / "out"
    evaluate_and_report(
        perfect_dataset, run_cfg(save_maps=False), out, models=perfect_models()
    )
    assert not (out / "maps").exists()
    assert (out / "report.csv").is_file()


def test_worker_resolves_default_binding(tmp_path):
    root = tmp_path / "data"
    write_perfect_dataset(root, ["tiny"], size=64)
    manifest = load_dataset(root)
    result = evaluate_and_report(manifest, run_cfg(), tmp_path / "out")
    assert result.exit_code == 0
    assert result.rows[0].mae is not None


def test_one_bad_image_does_not_sink_the_run(tmp_path):
    root = tmp_path / "data"
    write_perfect_dataset(root, ["good_a", "good_b"], size=64)
    # A pair whose mask dimensions disagree with the image.
    rng = np.random.default_rng(3)
    save_image(
        root / "images" / "mismatched.png",
        RasterImage(rng.integers(0, 256, (64, 64, 3)).astype(np.uint8)),
    )
    save_map(root / "gt" / "mismatched.png", SaliencyMap(np.ones((32, 64))))
    manifest = load_dataset(root)
    result = evaluate_and_report(
        manifest, run_cfg(), tmp_path / "out", models=perfect_models(64)
    )
    assert result.exit_code == 1
    assert [row.name for row in result.rows] == ["good_a", "good_b", "mismatched"]
    failed = result.rows[2]
    assert failed.failed and failed.mae is None
    assert "does not match ground" in failed.flags[0]
    assert not result.rows[0].failed and not result.rows[1].failed
    report_lines = (tmp_path / "out" / "report.csv").read_text().splitlines()
    assert report_lines[3].startswith("mismatched,,,,,,")
    summary = (tmp_path / "out" / "summary.md").read_text()
    assert "## Failures" in summary and "mismatched" in summary


def test_degenerate_gt_is_flagged(tmp_path):
    root = tmp_path / "data"
    (root / "images").mkdir(parents=True)
    (root / "gt").mkdir(parents=True)
    save_image(root / "images" / "empty.png", RasterImage(np.zeros((64, 64, 3), np.uint8)))
    save_map(root / "gt" / "empty.png", SaliencyMap(np.zeros((64, 64))))
    manifest = load_dataset(root)
    result = evaluate_and_report(
        manifest, run_cfg(), tmp_path / "out", models=perfect_models(64)
    )
    assert result.exit_code == 0
    row = result.rows[0]
    assert "gt-degenerate" in row.flags
    assert "bde-undefined" in row.flags
    assert row.bde is None


# --------------------------------------------------- stored-map evaluation


def test_evaluate_prediction_dir(tmp_path):
    gt_dir = tmp_path / "gt"
    pred_dir = tmp_path / "preds"
    gt_dir.mkdir()
    pred_dir.mkdir()
    rng = np.random.default_rng(4)
    mask = blob_mask(rng, 48, 48)
    save_map(gt_dir / "scene.png", SaliencyMap(mask.astype(np.float64)))
    save_map(pred_dir / "scene.png", SaliencyMap(mask.astype(np.float64)))
    save_map(gt_dir / "missing_pred.png", SaliencyMap(mask.astype(np.float64)))
    save_map(pred_dir / "missing_gt.png", SaliencyMap(mask.astype(np.float64)))

    result = evaluate_prediction_dir(pred_dir, gt_dir, RunConfig(), tmp_path / "out")
    assert [row.name for row in result.rows] == ["scene"]
    assert result.rows[0].f_beta == 1.0
    assert result.rows[0].mae == 0.0
    assert len(result.skipped) == 2
    assert (tmp_path / "out" / "report.csv").is_file()
    assert not (tmp_path / "out" / "timings.csv").exists()
    assert not (tmp_path / "out" / "maps").exists()


def test_evaluate_prediction_dir_requires_pairs(tmp_path):
    (tmp_path / "preds").mkdir()
    (tmp_path / "gt").mkdir()
    with pytest.raises(ValueError, match="no prediction/ground-truth pairs"):
        evaluate_prediction_dir(tmp_path / "preds", tmp_path / "gt", RunConfig(), tmp_path / "out")
    with pytest.raises(ValueError, match="prediction directory not found"):
        evaluate_prediction_dir(tmp_path / "absent", tmp_path / "gt", RunConfig(), tmp_path / "out")
