"""Metric tests against frozen values and the naive reference implementations."""

from __future__ import annotations

import numpy as np
import pytest

from hisal.metrics import (
    MetricConfig,
    UndefinedMetricError,
    bde,
    binarize_map,
    boundary_mask,
    compute_report,
    f_beta_adaptive,
    mae,
    pr_curve,
    s_measure,
)
from hisal.raster import BinaryMask, SaliencyMap

from oracles import (
    naive_f_beta,
    naive_mae,
    naive_pr_points,
    quadratic_bde,
    random_blob_mask,
    reference_s_measure,
)

CFG = MetricConfig()


def random_pair(rng: np.random.Generator, width: int, height: int):
    """A smooth-ish prediction map plus a blob ground truth."""
    gt = random_blob_mask(rng, width, height)
    noise = rng.random((height, width))
    pred = np.clip(0.65 * gt + 0.35 * noise, 0.0, 1.0)
    return SaliencyMap(pred), BinaryMask(gt)


class TestMae:
    def test_identical_inputs_score_zero(self):
        gt = BinaryMask((np.arange(64).reshape(8, 8) % 2).astype(np.uint8))
        assert mae(SaliencyMap(gt.data.astype(np.float64)), gt) == 0.0

    def test_opposite_inputs_score_one(self):
        pred = SaliencyMap(np.zeros((8, 8)))
        gt = BinaryMask(np.ones((8, 8), dtype=np.uint8))
        assert mae(pred, gt) == 1.0

    def test_matches_naive_loop(self):
        rng = np.random.default_rng(61)
        for _ in range(10):
            pred, gt = random_pair(rng, 32, 24)
            assert mae(pred, gt) == pytest.approx(naive_mae(pred.data, gt.data), abs=1e-12)

    def test_dimension_mismatch_is_an_error(self):
        with pytest.raises(ValueError):
            mae(SaliencyMap(np.zeros((4, 4))), BinaryMask(np.zeros((4, 5), dtype=np.uint8)))


class TestFBetaAdaptive:
    def test_frozen_hand_case(self):
        # 100 pixels, 8 foreground; 5 predicted positives, 4 of them correct:
        # precision 0.8, recall 0.5 -> F = 1.3*0.4 / (0.3*0.8 + 0.5) = 0.52/0.74
        gt = np.zeros((10, 10), dtype=np.uint8)
        gt.flat[:8] = 1
        pred = np.zeros((10, 10))
        pred.flat[:4] = 1.0   # four true positives
        pred.flat[20] = 1.0   # one false positive
        value = f_beta_adaptive(SaliencyMap(pred), BinaryMask(gt), CFG)
        assert value == pytest.approx(0.52 / 0.74, abs=1e-12)

    def test_perfect_binary_prediction_scores_one(self):
        rng = np.random.default_rng(67)
        gt = random_blob_mask(rng, 40, 30)
        value = f_beta_adaptive(SaliencyMap(gt.astype(np.float64)), BinaryMask(gt), CFG)
        assert value == pytest.approx(1.0, abs=1e-12)

    def test_all_ones_prediction_uses_capped_threshold(self):
        # threshold caps below 1.0, so an all-ones map still predicts positives
        pred = SaliencyMap(np.ones((16, 16)))
        gt = BinaryMask(np.ones((16, 16), dtype=np.uint8))
        assert f_beta_adaptive(pred, gt, CFG) == pytest.approx(1.0, abs=1e-12)

    def test_empty_prediction_scores_zero(self):
        rng = np.random.default_rng(71)
        gt = random_blob_mask(rng, 16, 16)
        assert f_beta_adaptive(SaliencyMap(np.zeros((16, 16))), BinaryMask(gt), CFG) == 0.0

    def test_empty_gt_scores_zero_and_is_flagged(self):
        pred = SaliencyMap(np.full((16, 16), 0.9))
        gt = BinaryMask(np.zeros((16, 16), dtype=np.uint8))
        assert f_beta_adaptive(pred, gt, CFG) == 0.0
        report = compute_report(pred, gt, CFG)
        assert report.degenerate_gt
        assert report.f_beta == 0.0

    def test_matches_naive_loop(self):
        rng = np.random.default_rng(73)
        for _ in range(10):
            pred, gt = random_pair(rng, 24, 24)
            assert f_beta_adaptive(pred, gt, CFG) == pytest.approx(
                naive_f_beta(pred.data, gt.data, CFG.beta_sq), abs=1e-12
            )

    def test_equals_pr_point_at_the_adaptive_threshold(self):
        rng = np.random.default_rng(79)
        for _ in range(10):
            pred, gt = random_pair(rng, 24, 24)
            threshold = min(2.0 * pred.data.mean(), 1.0 - 1.0 / 510.0)
            positive = pred.data > threshold
            fg = gt.data > 0
            tp = int((positive & fg).sum())
            precision = tp / positive.sum() if positive.sum() else 0.0
            recall = tp / fg.sum() if fg.sum() else 0.0
            denom = CFG.beta_sq * precision + recall
            expected = 0.0 if denom == 0 else (1 + CFG.beta_sq) * precision * recall / denom
            assert f_beta_adaptive(pred, gt, CFG) == pytest.approx(expected, abs=1e-12)


class TestPRCurve:
    def test_top_threshold_point_is_frozen(self):
        rng = np.random.default_rng(83)
        pred, gt = random_pair(rng, 16, 16)
        points = pr_curve(pred, gt, CFG).points
        assert len(points) == 256
        # nothing exceeds byte 255: empty prediction, precision 1 by convention
        assert points[255] == (255, 1.0, 0.0)

    def test_recall_never_increases_with_threshold(self):
        rng = np.random.default_rng(89)
        for _ in range(5):
            pred, gt = random_pair(rng, 32, 32)
            _, _, recall = pr_curve(pred, gt, CFG).as_arrays()
            assert (np.diff(recall) <= 1e-15).all()

    def test_matches_per_threshold_recount(self):
        rng = np.random.default_rng(97)
        for _ in range(5):
            pred, gt = random_pair(rng, 24, 24)
            expected = naive_pr_points(pred.data, gt.data, CFG.pr_levels)
            got = pr_curve(pred, gt, CFG).points
            for (et, ep, er), (gt_, gp, gr) in zip(expected, got):
                assert et == gt_
                assert gp == pytest.approx(ep, abs=1e-12)
                assert gr == pytest.approx(er, abs=1e-12)

    def test_reduced_levels_subsample_the_thresholds(self):
        rng = np.random.default_rng(101)
        pred, gt = random_pair(rng, 16, 16)
        cfg = MetricConfig(pr_levels=11)
        points = pr_curve(pred, gt, cfg).points
        assert len(points) == 11
        assert points[0][0] == 0
        assert points[-1][0] == 255
        expected = naive_pr_points(pred.data, gt.data, 11)
        for (et, ep, er), (t, p, r) in zip(expected, points):
            assert (et, p, r) == (t, pytest.approx(ep, abs=1e-12), pytest.approx(er, abs=1e-12))


class TestSMeasure:
    def test_prediction_identical_to_gt_scores_one(self):
        rng = np.random.default_rng(103)
        for _ in range(5):
            gt = random_blob_mask(rng, 32, 32)
            if gt.all():
                continue
            value = s_measure(SaliencyMap(gt.astype(np.float64)), BinaryMask(gt), CFG)
            assert value == pytest.approx(1.0, abs=1e-9)

    def test_degenerate_gt_rules(self):
        zeros = BinaryMask(np.zeros((8, 8), dtype=np.uint8))
        ones = BinaryMask(np.ones((8, 8), dtype=np.uint8))
        assert s_measure(SaliencyMap(np.zeros((8, 8))), zeros, CFG) == 1.0
        assert s_measure(SaliencyMap(np.full((8, 8), 0.25)), zeros, CFG) == pytest.approx(0.75)
        assert s_measure(SaliencyMap(np.full((8, 8), 0.25)), ones, CFG) == pytest.approx(0.25)

    def test_matches_reference_transcription(self):
        rng = np.random.default_rng(107)
        for _ in range(30):
            width = int(rng.integers(3, 48))
            height = int(rng.integers(3, 48))
            pred, gt = random_pair(rng, width, height)
            if not gt.data.any() or gt.data.all():
                continue
            expected = reference_s_measure(pred.data, gt.data, CFG.s_alpha)
            assert s_measure(pred, gt, CFG) == pytest.approx(expected, abs=1e-6)

    def test_corner_centroid_and_single_pixel_foreground(self):
        # single foreground pixel at the corner produces 1x1 split blocks
        gt = np.zeros((5, 5), dtype=np.uint8)
        gt[0, 0] = 1
        pred = np.clip(np.random.default_rng(109).random((5, 5)), 0.0, 1.0)
        value = s_measure(SaliencyMap(pred), BinaryMask(gt), CFG)
        expected = reference_s_measure(pred, gt, CFG.s_alpha)
        assert value == pytest.approx(expected, abs=1e-9)
        assert 0.0 <= value <= 1.0

    def test_score_is_clamped_non_negative(self):
        # inverted prediction drives the object term negative pre-clamp
        gt = np.zeros((10, 10), dtype=np.uint8)
        gt[3:7, 3:7] = 1
        pred = 1.0 - gt.astype(np.float64)
        assert s_measure(SaliencyMap(pred), BinaryMask(gt), CFG) >= 0.0


class TestBde:
    def test_identical_masks_score_zero(self):
        rng = np.random.default_rng(113)
        gt = random_blob_mask(rng, 32, 32)
        assert bde(BinaryMask(gt), BinaryMask(gt)) == 0.0

    def test_three_four_five_offset_is_exactly_five(self):
        a = np.zeros((16, 16), dtype=np.uint8)
        b = np.zeros((16, 16), dtype=np.uint8)
        a[2, 3] = 1
        b[6, 6] = 1  # offset (3, 4): hypotenuse exactly 5
        assert bde(BinaryMask(a), BinaryMask(b)) == 5.0

    def test_symmetry(self):
        rng = np.random.default_rng(127)
        for _ in range(5):
            a = random_blob_mask(rng, 40, 28)
            b = random_blob_mask(rng, 40, 28)
            assert bde(BinaryMask(a), BinaryMask(b)) == bde(BinaryMask(b), BinaryMask(a))

    def test_matches_quadratic_oracle(self):
        rng = np.random.default_rng(131)
        for _ in range(8):
            a = random_blob_mask(rng, 48, 36)
            b = random_blob_mask(rng, 48, 36)
            expected = quadratic_bde(a, b)
            assert bde(BinaryMask(a), BinaryMask(b)) == pytest.approx(expected, abs=1e-6)

    def test_all_foreground_mask_still_has_a_boundary(self):
        # the image border counts as background, so a full mask is defined
        full = BinaryMask(np.ones((12, 12), dtype=np.uint8))
        blob = BinaryMask(random_blob_mask(np.random.default_rng(137), 12, 12))
        value = bde(full, blob)
        assert value == pytest.approx(quadratic_bde(full.data, blob.data), abs=1e-6)

    def test_empty_mask_is_undefined(self):
        empty = BinaryMask(np.zeros((8, 8), dtype=np.uint8))
        blob = BinaryMask(random_blob_mask(np.random.default_rng(139), 8, 8))
        with pytest.raises(UndefinedMetricError):
            bde(empty, blob)
        with pytest.raises(UndefinedMetricError):
            bde(blob, empty)

    def test_boundary_extraction_matches_loop(self):
        rng = np.random.default_rng(149)
        for _ in range(5):
            mask = random_blob_mask(rng, 24, 24)
            expected = np.zeros_like(mask, dtype=bool)
            from oracles import boundary_points

            for x, y in boundary_points(mask):
                expected[y, x] = True
            assert np.array_equal(boundary_mask(BinaryMask(mask)), expected)


class TestFlipInvariance:
    def test_mae_f_beta_pr_bde_survive_horizontal_flips(self):
        rng = np.random.default_rng(151)
        pred, gt = random_pair(rng, 24, 20)
        flipped_pred = SaliencyMap(pred.data[:, ::-1])
        flipped_gt = BinaryMask(gt.data[:, ::-1])
        assert mae(pred, gt) == mae(flipped_pred, flipped_gt)
        assert f_beta_adaptive(pred, gt, CFG) == f_beta_adaptive(flipped_pred, flipped_gt, CFG)
        assert pr_curve(pred, gt, CFG).points == pr_curve(flipped_pred, flipped_gt, CFG).points
        pred_mask = binarize_map(pred, CFG.bde_threshold)
        flipped_mask = binarize_map(flipped_pred, CFG.bde_threshold)
        assert bde(pred_mask, gt) == bde(flipped_mask, flipped_gt)


class TestBinarize:
    def test_threshold_at_byte_128(self):
        values = SaliencyMap(np.array([[0.0, 127 / 255.0, 0.5, 1.0]]))
        assert binarize_map(values, 128).data.tolist() == [[0, 0, 1, 1]]

    def test_agrees_with_mask_loading_convention(self):
        # bytes strictly above 127 are foreground either way
        levels = np.arange(256, dtype=np.uint8).reshape(16, 16)
        from hisal.raster import map_from_bytes

        mask = binarize_map(map_from_bytes(levels), 128)
        assert np.array_equal(mask.data, (levels > 127).astype(np.uint8))


class TestReport:
    def test_report_carries_flags_and_values(self):
        rng = np.random.default_rng(157)
        pred, gt = random_pair(rng, 32, 32)
        report = compute_report(pred, gt, CFG)
        assert report.mae == mae(pred, gt)
        assert report.f_beta == f_beta_adaptive(pred, gt, CFG)
        assert report.s_measure == s_measure(pred, gt, CFG)
        assert report.pr.points == pr_curve(pred, gt, CFG).points
        assert not report.degenerate_gt

    def test_undefined_bde_is_reported_as_none(self):
        pred = SaliencyMap(np.zeros((8, 8)))
        gt = BinaryMask(random_blob_mask(np.random.default_rng(163), 8, 8))
        report = compute_report(pred, gt, CFG)
        assert report.bde is None


class TestMetricConfig:
    def test_rejects_bad_values(self):
        with pytest.raises(ValueError):
            MetricConfig(beta_sq=0.0)
        with pytest.raises(ValueError):
            MetricConfig(pr_levels=1)
        with pytest.raises(ValueError):
            MetricConfig(s_alpha=1.5)
        with pytest.raises(ValueError):
            MetricConfig(bde_threshold=0)
