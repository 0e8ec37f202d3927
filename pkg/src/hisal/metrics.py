"""Saliency evaluation metrics.

All metrics compare a real-valued prediction in ``[0, 1]`` against a
binary ground-truth mask:

* ``mae``: mean absolute error.
* ``f_beta_adaptive``: F-measure at the adaptive threshold
  ``min(2 * mean(pred), 1 - 1/510)``; pixels strictly above the threshold
  count as positives. Precision is 0 when nothing is predicted and the
  F value is 0 when its denominator vanishes.
* ``pr_curve``: precision/recall at byte thresholds; a pixel is positive
  when its byte value is strictly greater than the threshold. Precision
  is 1 by convention when nothing is predicted.
* ``s_measure``: structural similarity of foreground/background statistics
  (object term) and of four blocks split at the ground-truth centroid
  (region term), mixed by ``s_alpha``. Degenerate masks short-circuit:
  an all-zero mask scores ``1 - mean(pred)``, an all-one mask
  ``mean(pred)``.
* ``bde``: boundary displacement error, the symmetrized mean distance
  between the two masks' boundary pixel sets. A boundary pixel is a
  foreground pixel with a 4-neighbor that is background or off the image.
  A mask with no boundary pixels makes the metric undefined.

Byte quantization follows :func:`hisal.raster.byte_scale` (round half up),
and binarization of real-valued maps puts bytes at or above the threshold
in the foreground, matching how stored masks are loaded.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.ndimage import distance_transform_edt

from .raster import BinaryMask, SaliencyMap, byte_scale

__all__ = [
    "UndefinedMetricError",
    "MetricConfig",
    "PRCurve",
    "MetricReport",
    "binarize_map",
    "boundary_mask",
    "mae",
    "f_beta_adaptive",
    "pr_curve",
    "s_measure",
    "bde",
    "compute_report",
]

_EPS = float(np.spacing(1.0))


class UndefinedMetricError(ValueError):
    """The metric has no value for these inputs (e.g. no boundary pixels)."""


@dataclass(frozen=True)
class MetricConfig:
    """Shared metric knobs.

    Attributes:
        beta_sq: Squared beta weighting precision in the F-measure.
        pr_levels: Number of byte thresholds on the PR curve.
        s_alpha: Mix between the object and region structure terms.
        bde_threshold: Byte level at or above which a map pixel counts as
            foreground when binarizing for the boundary metric.
    """

    beta_sq: float = 0.3
    pr_levels: int = 256
    s_alpha: float = 0.5
    bde_threshold: int = 128

    def __post_init__(self) -> None:
        if self.beta_sq <= 0:
            raise ValueError(f"beta_sq must be positive, got {self.beta_sq}")
        if self.pr_levels < 2 or self.pr_levels > 256:
            raise ValueError(f"pr_levels must lie in [2, 256], got {self.pr_levels}")
        if not 0.0 <= self.s_alpha <= 1.0:
            raise ValueError(f"s_alpha must lie in [0, 1], got {self.s_alpha}")
        if not 1 <= self.bde_threshold <= 255:
            raise ValueError(
                f"bde_threshold must lie in [1, 255], got {self.bde_threshold}"
            )


@dataclass(frozen=True)
class PRCurve:
    """Precision/recall points as ``(threshold byte, precision, recall)``."""

    points: tuple[tuple[int, float, float], ...]

    def as_arrays(self) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
        thresholds = np.array([p[0] for p in self.points], dtype=np.int64)
        precision = np.array([p[1] for p in self.points], dtype=np.float64)
        recall = np.array([p[2] for p in self.points], dtype=np.float64)
        return thresholds, precision, recall


@dataclass(frozen=True)
class MetricReport:
    """All metrics for one prediction/ground-truth pair.

    ``bde`` is None when either mask has no boundary pixels.
    ``degenerate_gt`` marks an all-zero ground truth, whose F value is
    reported as 0 by convention and should be read with that flag.
    """

    mae: float
    f_beta: float
    s_measure: float
    bde: float | None
    pr: PRCurve
    degenerate_gt: bool


def _check_pair(pred: SaliencyMap, gt: BinaryMask) -> None:
    if (pred.width, pred.height) != (gt.width, gt.height):
        raise ValueError(
            f"prediction {pred.width}x{pred.height} does not match ground truth "
            f"{gt.width}x{gt.height}"
        )


def binarize_map(pred: SaliencyMap, threshold_byte: int = 128) -> BinaryMask:
    """Foreground where the byte-quantized value is >= ``threshold_byte``."""
    if not 1 <= threshold_byte <= 255:
        raise ValueError(f"threshold_byte must lie in [1, 255], got {threshold_byte}")
    return BinaryMask((byte_scale(pred) >= threshold_byte).astype(np.uint8))


def boundary_mask(mask: BinaryMask) -> np.ndarray:
    """Boolean grid of foreground pixels touching background or the border."""
    fg = mask.data.astype(bool)
    padded = np.pad(fg, 1, constant_values=False)
    interior = (
        padded[:-2, 1:-1] & padded[2:, 1:-1] & padded[1:-1, :-2] & padded[1:-1, 2:]
    )
    return fg & ~interior


def mae(pred: SaliencyMap, gt: BinaryMask) -> float:
    """Mean absolute error between the map and the 0/1 mask."""
    _check_pair(pred, gt)
    return float(np.abs(pred.data - gt.data.astype(np.float64)).mean())


def f_beta_adaptive(pred: SaliencyMap, gt: BinaryMask, cfg: MetricConfig) -> float:
    """F-measure at the adaptive threshold min(2*mean(pred), 1 - 1/510)."""
    _check_pair(pred, gt)
    threshold = min(2.0 * float(pred.data.mean()), 1.0 - 1.0 / 510.0)
    positive = pred.data > threshold
    fg = gt.data.astype(bool)
    tp = int(np.count_nonzero(positive & fg))
    predicted = int(np.count_nonzero(positive))
    actual = int(np.count_nonzero(fg))
    precision = tp / predicted if predicted else 0.0
    recall = tp / actual if actual else 0.0
    denom = cfg.beta_sq * precision + recall
    if denom == 0.0:
        return 0.0
    return (1.0 + cfg.beta_sq) * precision * recall / denom


def _pr_thresholds(levels: int) -> list[int]:
    return [round(i * 255 / (levels - 1)) for i in range(levels)]


def pr_curve(pred: SaliencyMap, gt: BinaryMask, cfg: MetricConfig) -> PRCurve:
    """Precision/recall over byte thresholds (positive means byte > threshold).

    Counting is exact: per-byte histograms are accumulated once and
    suffix-summed, which matches per-threshold recounting bit for bit.
    With an all-zero ground truth recall is reported as 0 at every
    threshold; such pairs are flagged upstream.
    """
    _check_pair(pred, gt)
    levels = byte_scale(pred)
    fg = gt.data.astype(bool)
    fg_total = int(np.count_nonzero(fg))
    fg_hist = np.bincount(levels[fg], minlength=256)
    all_hist = np.bincount(levels.ravel(), minlength=256)
    # above[t] = number of pixels with byte value strictly greater than t
    fg_above = np.concatenate([np.cumsum(fg_hist[::-1])[::-1][1:], [0]])
    all_above = np.concatenate([np.cumsum(all_hist[::-1])[::-1][1:], [0]])
    points = []
    for threshold in _pr_thresholds(cfg.pr_levels):
        tp = int(fg_above[threshold])
        predicted = int(all_above[threshold])
        precision = tp / predicted if predicted else 1.0
        recall = tp / fg_total if fg_total else 0.0
        points.append((threshold, precision, recall))
    return PRCurve(tuple(points))


def _object_score(values: np.ndarray) -> float:
    if values.size == 0:
        return 0.0
    x = float(values.mean())
    sigma = float(values.std(ddof=1)) if values.size > 1 else 0.0
    return 2.0 * x / (x * x + 1.0 + sigma + _EPS)


def _centroid_split(fg: np.ndarray) -> tuple[int, int]:
    """Foreground centroid as block-split indices (column, row).

    Coordinates are the rounded-half-up means shifted by one, so the
    centroid row/column itself lands in the top/left blocks.
    """
    rows, cols = np.nonzero(fg)
    col_split = int(np.floor(cols.mean() + 0.5)) + 1
    row_split = int(np.floor(rows.mean() + 0.5)) + 1
    return col_split, row_split


def _ssim_block(x: np.ndarray, y: np.ndarray) -> float:
    n = x.size
    if n == 0:
        return 0.0
    x_mean = float(x.mean())
    y_mean = float(y.mean())
    if n > 1:
        sx = float(((x - x_mean) ** 2).sum() / (n - 1))
        sy = float(((y - y_mean) ** 2).sum() / (n - 1))
        sxy = float(((x - x_mean) * (y - y_mean)).sum() / (n - 1))
    else:
        sx = sy = sxy = 0.0
    alpha = 4.0 * x_mean * y_mean * sxy
    beta = (x_mean**2 + y_mean**2) * (sx + sy)
    if alpha != 0.0:
        return alpha / (beta + _EPS)
    if beta == 0.0:
        return 1.0
    return 0.0


def _s_region(pred: np.ndarray, fg: np.ndarray) -> float:
    height, width = fg.shape
    col_split, row_split = _centroid_split(fg)
    area = float(width * height)
    w1 = (col_split * row_split) / area
    w2 = ((width - col_split) * row_split) / area
    w3 = (col_split * (height - row_split)) / area
    w4 = 1.0 - w1 - w2 - w3
    gt_f = fg.astype(np.float64)
    score = 0.0
    for weight, (ys, xs) in (
        (w1, (slice(None, row_split), slice(None, col_split))),
        (w2, (slice(None, row_split), slice(col_split, None))),
        (w3, (slice(row_split, None), slice(None, col_split))),
        (w4, (slice(row_split, None), slice(col_split, None))),
    ):
        score += weight * _ssim_block(pred[ys, xs], gt_f[ys, xs])
    return score


def s_measure(pred: SaliencyMap, gt: BinaryMask, cfg: MetricConfig) -> float:
    """Structure measure mixing object and region similarity by s_alpha."""
    _check_pair(pred, gt)
    fg = gt.data.astype(bool)
    coverage = float(fg.mean())
    values = pred.data
    if coverage == 0.0:
        return 1.0 - float(values.mean())
    if coverage == 1.0:
        return float(values.mean())
    s_object = coverage * _object_score(values[fg]) + (1.0 - coverage) * _object_score(
        1.0 - values[~fg]
    )
    s_region = _s_region(values, fg)
    return max(0.0, cfg.s_alpha * s_object + (1.0 - cfg.s_alpha) * s_region)


def bde(pred_mask: BinaryMask, gt_mask: BinaryMask) -> float:
    """Symmetrized mean distance between the two masks' boundary pixels.

    For boundary sets X (prediction) and Y (ground truth):
    ``0.5 * (mean over X of the distance to the nearest point of Y
    + mean over Y of the distance to the nearest point of X)``.
    """
    if (pred_mask.width, pred_mask.height) != (gt_mask.width, gt_mask.height):
        raise ValueError(
            f"prediction {pred_mask.width}x{pred_mask.height} does not match "
            f"ground truth {gt_mask.width}x{gt_mask.height}"
        )
    pred_boundary = boundary_mask(pred_mask)
    gt_boundary = boundary_mask(gt_mask)
    if not pred_boundary.any():
        raise UndefinedMetricError("prediction mask has no boundary pixels")
    if not gt_boundary.any():
        raise UndefinedMetricError("ground-truth mask has no boundary pixels")
    dist_to_gt = distance_transform_edt(~gt_boundary)
    dist_to_pred = distance_transform_edt(~pred_boundary)
    return 0.5 * (float(dist_to_gt[pred_boundary].mean()) + float(dist_to_pred[gt_boundary].mean()))


def compute_report(pred: SaliencyMap, gt: BinaryMask, cfg: MetricConfig) -> MetricReport:
    """Evaluate every metric for one pair, tolerating degenerate inputs."""
    _check_pair(pred, gt)
    degenerate = not bool(gt.data.any())
    try:
        bde_value: float | None = bde(binarize_map(pred, cfg.bde_threshold), gt)
    except UndefinedMetricError:
        bde_value = None
    return MetricReport(
        mae=mae(pred, gt),
        f_beta=f_beta_adaptive(pred, gt, cfg),
        s_measure=s_measure(pred, gt, cfg),
        bde=bde_value,
        pr=pr_curve(pred, gt, cfg),
        degenerate_gt=degenerate,
    )
