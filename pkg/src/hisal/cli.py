"""Command-line interface.

Subcommands:

* ``run``            pipeline on a single image; writes final/coarse maps,
                     the attention map, and the sampled regions.
* ``eval``           pipeline plus metrics over a dataset; writes the full
                     report tree (see :mod:`hisal.harness`).
* ``sample-patches`` attention map and sampled regions only; regions go to
                     stdout as CSV unless an output directory is given.
* ``metrics``        score stored prediction maps against ground truth.

Flags mirror config-file keys and win over them; see ``--config`` for the
file format (:mod:`hisal.config`).
"""

from __future__ import annotations

import argparse
import sys
from pathlib import Path

import numpy as np

from .config import load_config_file
from .dataset import load_dataset
from .harness import build_run_config, evaluate_and_report, evaluate_prediction_dir
from .pipeline import run_pipeline
from .predictors import run_coarse
from .raster import SaliencyMap, load_image, save_map
from .report import write_patches_csv
from .sampler import build_attention_map, sample_patches

__all__ = ["main"]


def _common_flags(parser: argparse.ArgumentParser, jobs: bool = False) -> None:
    parser.add_argument("--config", type=Path, default=None, help="key = value config file")
    parser.add_argument("--seed", type=int, default=None, help="sampler seed (64-bit)")
    parser.add_argument(
        "--coarse",
        default=None,
        help="coarse predictor: baseline | sidecar:CMD | sidecar:HOST:PORT",
    )
    parser.add_argument(
        "--refiner",
        default=None,
        help="patch refiner: identity | local-contrast | sidecar:CMD | sidecar:HOST:PORT",
    )
    parser.add_argument(
        "--fusion",
        default=None,
        choices=["replace-uncertain", "paste-all"],
        help="which pixels adopt refined values",
    )
    parser.add_argument(
        "--consistency",
        default=None,
        choices=["none", "edge-aware"],
        help="post-fusion consistency stage",
    )
    if jobs:
        parser.add_argument("--jobs", type=int, default=None, help="parallel image workers")


def _build_config(args: argparse.Namespace, with_jobs: bool = False):
    entries = load_config_file(args.config) if args.config else None
    overrides = {
        "sampler_seed": args.seed,
        "predictor_coarse": args.coarse,
        "predictor_refiner": args.refiner,
        "fusion_mode": args.fusion,
        "fusion_consistency": args.consistency,
    }
    if with_jobs and getattr(args, "jobs", None) is not None:
        overrides["run_jobs"] = args.jobs
    if getattr(args, "no_maps", False):
        overrides["run_save_maps"] = False
    return build_run_config(entries, **overrides)


def _attention_to_map(attention) -> SaliencyMap:
    return SaliencyMap(attention.data.astype(np.float64))


def _cmd_run(args: argparse.Namespace) -> int:
    cfg = _build_config(args)
    image = load_image(args.image)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    with cfg.binding.resolve() as models:
        result = run_pipeline(image, cfg.sampler, cfg.fusion, models)
    save_map(out / "final.png", result.final)
    save_map(out / "coarse.png", result.coarse)
    save_map(out / "attention.png", _attention_to_map(result.attention))
    with open(out / "patches.csv", "w", newline="", encoding="utf-8") as handle:
        write_patches_csv(result.samples, handle)
    for stage in ("coarse_ms", "sample_ms", "refine_ms", "fuse_ms", "total_ms"):
        print(f"{stage}: {result.timings_ms[stage]:.1f}")
    print(f"patches: {len(result.samples)}")
    print(f"outputs: {out}")
    return 0


def _cmd_eval(args: argparse.Namespace) -> int:
    cfg = _build_config(args, with_jobs=True)
    manifest = load_dataset(args.dataset, layout=args.layout)
    result = evaluate_and_report(manifest, cfg, args.out)
    failed = result.failed_rows
    print(f"evaluated {len(result.rows)} images ({len(failed)} failed, "
          f"{len(result.skipped)} skipped); reports in {result.out_dir}")
    for row in failed:
        print(f"  failed: {row.name}: {'; '.join(row.flags)}", file=sys.stderr)
    return result.exit_code


def _cmd_sample_patches(args: argparse.Namespace) -> int:
    cfg = _build_config(args)
    image = load_image(args.image)
    with cfg.binding.resolve() as models:
        coarse = run_coarse(image, models)
    attention = build_attention_map(coarse, cfg.sampler)
    samples = sample_patches(attention, image.width, image.height, cfg.sampler)
    if args.out is None:
        write_patches_csv(samples, sys.stdout)
    else:
        out = Path(args.out)
        out.mkdir(parents=True, exist_ok=True)
        with open(out / "patches.csv", "w", newline="", encoding="utf-8") as handle:
            write_patches_csv(samples, handle)
        save_map(out / "attention.png", _attention_to_map(attention))
        print(f"wrote {len(samples)} regions to {out}")
    return 0


def _cmd_metrics(args: argparse.Namespace) -> int:
    entries = load_config_file(args.config) if args.config else None
    cfg = build_run_config(entries)
    result = evaluate_prediction_dir(args.pred, args.gt, cfg, args.out)
    failed = result.failed_rows
    print(f"scored {len(result.rows)} pairs ({len(failed)} failed, "
          f"{len(result.skipped)} skipped); reports in {result.out_dir}")
    return result.exit_code


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="hisal",
        description="Coarse-to-fine high-resolution saliency pipeline and evaluation harness.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p_run = sub.add_parser("run", help="run the pipeline on one image")
    p_run.add_argument("image", type=Path, help="input image (PNG or JPEG)")
    p_run.add_argument("--out", type=Path, required=True, help="output directory")
    _common_flags(p_run)
    p_run.set_defaults(func=_cmd_run)

    p_eval = sub.add_parser("eval", help="evaluate the pipeline over a dataset")
    p_eval.add_argument("dataset", type=Path, help="dataset root or manifest CSV")
    p_eval.add_argument(
        "--layout",
        default="paired-dirs",
        choices=["paired-dirs", "manifest-file"],
        help="how image/gt pairs are discovered",
    )
    p_eval.add_argument("--out", type=Path, required=True, help="output directory")
    p_eval.add_argument("--no-maps", action="store_true", help="skip writing final maps")
    _common_flags(p_eval, jobs=True)
    p_eval.set_defaults(func=_cmd_eval)

    p_sample = sub.add_parser("sample-patches", help="emit attention map and sampled regions")
    p_sample.add_argument("image", type=Path, help="input image (PNG or JPEG)")
    p_sample.add_argument("--out", type=Path, default=None, help="output directory (default: CSV to stdout)")
    _common_flags(p_sample)
    p_sample.set_defaults(func=_cmd_sample_patches)

    p_metrics = sub.add_parser("metrics", help="score stored prediction maps")
    p_metrics.add_argument("--pred", type=Path, required=True, help="directory of prediction maps")
    p_metrics.add_argument("--gt", type=Path, required=True, help="directory of ground-truth masks")
    p_metrics.add_argument("--out", type=Path, required=True, help="output directory")
    p_metrics.add_argument("--config", type=Path, default=None, help="key = value config file")
    p_metrics.set_defaults(func=_cmd_metrics)

    return parser


def main(argv: list[str] | None = None) -> int:
    args = _build_parser().parse_args(argv)
    try:
        return args.func(args)
    except (ValueError, OSError) as err:
        print(f"error: {err}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
