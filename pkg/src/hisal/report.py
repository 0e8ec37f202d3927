"""Report serialization: CSV/TSV tables, a markdown summary, and figures.

``report.csv`` holds only deterministic fields so a rerun with the same
seed reproduces it byte for byte; wall-clock stage timings go to a
separate ``timings.csv``. Per-image precision/recall curves land in
``pr/NAME.tsv`` and rendered figures under ``figures/``.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass, field
from pathlib import Path

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt
import numpy as np

from .metrics import PRCurve
from .sampler import PatchSample

__all__ = [
    "ReportRow",
    "REPORT_COLUMNS",
    "aggregate_rows",
    "write_report_csv",
    "write_timings_csv",
    "write_pr_tsv",
    "write_patches_csv",
    "write_summary_md",
    "render_figures",
]

REPORT_COLUMNS = ("image", "mae", "f_beta", "s_measure", "bde", "patch_count", "flags")
TIMING_COLUMNS = ("image", "coarse_ms", "sample_ms", "refine_ms", "fuse_ms", "total_ms")

# Per-image bar charts stop being readable past this many images.
_MAX_BAR_IMAGES = 48


@dataclass(frozen=True)
class ReportRow:
    """One evaluated image. Failed rows carry an ``error:`` flag and
    empty metric fields; degenerate metrics carry their own flags."""

    name: str
    mae: float | None = None
    f_beta: float | None = None
    s_measure: float | None = None
    bde: float | None = None
    patch_count: int | None = None
    flags: tuple[str, ...] = ()
    pr: PRCurve | None = None
    timings_ms: dict[str, float] = field(default_factory=dict)

    @property
    def failed(self) -> bool:
        return any(flag.startswith("error:") for flag in self.flags)


def _fmt(value: float | int | None) -> str:
    if value is None:
        return ""
    if isinstance(value, int):
        return str(value)
    return f"{value:.8f}"


def aggregate_rows(rows: list[ReportRow]) -> dict[str, tuple[float, int]]:
    """Unweighted means as ``{metric: (mean, contributing image count)}``.

    Undefined values (failed rows, undefined boundary errors) simply do
    not contribute; degenerate-gt rows contribute their conventional
    values.
    """
    aggregates: dict[str, tuple[float, int]] = {}
    for name in ("mae", "f_beta", "s_measure", "bde"):
        values = [getattr(row, name) for row in rows if getattr(row, name) is not None]
        if values:
            aggregates[name] = (float(np.mean(values)), len(values))
    return aggregates


def write_report_csv(rows: list[ReportRow], path: Path) -> None:
    with open(path, "w", newline="", encoding="utf-8") as handle:
        writer = csv.writer(handle)
        writer.writerow(REPORT_COLUMNS)
        for row in rows:
            writer.writerow(
                [
                    row.name,
                    _fmt(row.mae),
                    _fmt(row.f_beta),
                    _fmt(row.s_measure),
                    _fmt(row.bde),
                    _fmt(row.patch_count),
                    ";".join(row.flags),
                ]
            )


def write_timings_csv(rows: list[ReportRow], path: Path) -> None:
    with open(path, "w", newline="", encoding="utf-8") as handle:
        writer = csv.writer(handle)
        writer.writerow(TIMING_COLUMNS)
        for row in rows:
            writer.writerow(
                [row.name]
                + [
                    f"{row.timings_ms[key]:.3f}" if key in row.timings_ms else ""
                    for key in TIMING_COLUMNS[1:]
                ]
            )


def write_pr_tsv(curve: PRCurve, path: Path) -> None:
    lines = ["threshold\tprecision\trecall"]
    for threshold, precision, recall in curve.points:
        lines.append(f"{threshold}\t{precision:.8f}\t{recall:.8f}")
    Path(path).write_text("\n".join(lines) + "\n", encoding="utf-8")


def write_patches_csv(samples: list[PatchSample], handle) -> None:
    """Write sampled regions as ``t,x,y,w,h,origin`` rows to an open stream."""
    writer = csv.writer(handle, lineterminator="\n")
    writer.writerow(["t", "x", "y", "w", "h", "origin"])
    for sample in samples:
        region = sample.region
        writer.writerow(
            [sample.column_index, region.x, region.y, region.w, region.h, sample.origin.value]
        )


def write_summary_md(
    dataset_name: str,
    rows: list[ReportRow],
    skipped: tuple[str, ...],
    path: Path,
) -> None:
    evaluated = [row for row in rows if not row.failed]
    failed = [row for row in rows if row.failed]
    degenerate = [row for row in rows if "gt-degenerate" in row.flags]
    aggregates = aggregate_rows(rows)
    lines = [
        "# Evaluation summary",
        "",
        f"Dataset: `{dataset_name}`",
        "",
        f"- images evaluated: {len(evaluated)}",
        f"- images failed: {len(failed)}",
        f"- pairs skipped before evaluation: {len(skipped)}",
        f"- degenerate ground truths: {len(degenerate)}",
        "",
        "| metric | mean | images |",
        "| --- | --- | --- |",
    ]
    for name in ("mae", "f_beta", "s_measure", "bde"):
        if name in aggregates:
            mean, count = aggregates[name]
            lines.append(f"| {name} | {mean:.6f} | {count} |")
        else:
            lines.append(f"| {name} | -- | 0 |")
    if skipped:
        lines += ["", "## Skipped", ""]
        lines += [f"- {reason}" for reason in skipped]
    if failed:
        lines += ["", "## Failures", ""]
        for row in failed:
            reasons = "; ".join(flag for flag in row.flags if flag.startswith("error:"))
            lines += [f"- `{row.name}`: {reasons}"]
    Path(path).write_text("\n".join(lines) + "\n", encoding="utf-8")


def _aggregate_pr(rows: list[ReportRow]) -> tuple[np.ndarray, np.ndarray, np.ndarray] | None:
    curves = [row.pr for row in rows if row.pr is not None]
    if not curves:
        return None
    thresholds = curves[0].as_arrays()[0]
    precision = np.mean([curve.as_arrays()[1] for curve in curves], axis=0)
    recall = np.mean([curve.as_arrays()[2] for curve in curves], axis=0)
    return thresholds, precision, recall


def render_figures(rows: list[ReportRow], figures_dir: Path) -> list[Path]:
    """Render the aggregate PR curve and per-image score chart as PNGs."""
    figures_dir = Path(figures_dir)
    figures_dir.mkdir(parents=True, exist_ok=True)
    written: list[Path] = []

    aggregate = _aggregate_pr(rows)
    if aggregate is not None:
        _, precision, recall = aggregate
        fig, ax = plt.subplots(figsize=(5.0, 4.0), dpi=120)
        ax.plot(recall, precision, color="tab:blue", linewidth=1.5)
        ax.set_xlabel("recall")
        ax.set_ylabel("precision")
        ax.set_xlim(0.0, 1.0)
        ax.set_ylim(0.0, 1.05)
        ax.grid(True, linewidth=0.3, alpha=0.6)
        ax.set_title(f"Aggregate PR curve ({sum(r.pr is not None for r in rows)} images)")
        fig.tight_layout()
        target = figures_dir / "pr_curve.png"
        fig.savefig(target, metadata={"Software": None})
        plt.close(fig)
        written.append(target)

    scored = [row for row in rows if row.f_beta is not None][:_MAX_BAR_IMAGES]
    if scored:
        positions = np.arange(len(scored))
        fig, ax = plt.subplots(figsize=(max(5.0, 0.45 * len(scored) + 2.0), 4.0), dpi=120)
        ax.bar(positions - 0.2, [r.f_beta for r in scored], width=0.4, label="f_beta")
        ax.bar(
            positions + 0.2,
            [r.s_measure if r.s_measure is not None else 0.0 for r in scored],
            width=0.4,
            label="s_measure",
        )
        ax.set_xticks(positions)
        ax.set_xticklabels([r.name for r in scored], rotation=60, ha="right", fontsize=7)
        ax.set_ylim(0.0, 1.05)
        ax.set_ylabel("score")
        ax.legend(loc="lower right", fontsize=8)
        ax.set_title("Per-image scores")
        fig.tight_layout()
        target = figures_dir / "per_image.png"
        fig.savefig(target, metadata={"Software": None})
        plt.close(fig)
        written.append(target)

    return written
