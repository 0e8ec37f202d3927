"""Dataset discovery: pairing images with ground-truth masks.

Two layouts are supported:

* ``paired-dirs``: a root directory holding ``images/NAME.png`` (or
  ``.jpg``/``.jpeg``) and ``gt/NAME.png``, paired by stem.
* ``manifest-file``: a CSV whose rows are ``image,gt`` paths, resolved
  against the manifest's own directory when relative. A leading
  ``image,gt`` header row is allowed.

Pairs are ordered by name so downstream reports are deterministic. A pair
whose image or mask is missing or unreadable is skipped with a reason
rather than failing the run; an empty dataset is an error.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass
from pathlib import Path

from PIL import Image

__all__ = ["DatasetPair", "DatasetManifest", "load_dataset"]

_IMAGE_SUFFIXES = (".png", ".jpg", ".jpeg")


@dataclass(frozen=True)
class DatasetPair:
    """One image/ground-truth pair with its header-probed dimensions."""

    name: str
    image_path: Path
    gt_path: Path
    width: int
    height: int


@dataclass(frozen=True)
class DatasetManifest:
    """A validated list of pairs plus the entries that were skipped."""

    name: str
    pairs: tuple[DatasetPair, ...]
    skipped: tuple[str, ...]

    def resolution_range(self) -> tuple[int, int, int, int]:
        """(min width, min height, max width, max height) over all pairs."""
        widths = [p.width for p in self.pairs]
        heights = [p.height for p in self.pairs]
        return min(widths), min(heights), max(widths), max(heights)


def _probe_size(path: Path) -> tuple[int, int]:
    """Read width/height from the file header without decoding pixels."""
    with Image.open(path) as img:
        return img.size


def _build_pair(name: str, image_path: Path, gt_path: Path) -> DatasetPair | str:
    """Validate one candidate pair; returns the pair or a skip reason."""
    if not image_path.is_file():
        return f"{name}: image file missing: {image_path}"
    if not gt_path.is_file():
        return f"{name}: ground-truth file missing: {gt_path}"
    try:
        width, height = _probe_size(image_path)
    except OSError as err:
        return f"{name}: unreadable image {image_path}: {err}"
    try:
        _probe_size(gt_path)
    except OSError as err:
        return f"{name}: unreadable ground truth {gt_path}: {err}"
    return DatasetPair(name, image_path, gt_path, width, height)


def _load_paired_dirs(root: Path) -> tuple[list[DatasetPair], list[str]]:
    image_dir = root / "images"
    gt_dir = root / "gt"
    if not image_dir.is_dir():
        raise ValueError(f"dataset root {root} has no images/ directory")
    if not gt_dir.is_dir():
        raise ValueError(f"dataset root {root} has no gt/ directory")
    images: dict[str, Path] = {}
    for path in sorted(image_dir.iterdir()):
        if path.suffix.lower() in _IMAGE_SUFFIXES and path.is_file():
            if path.stem in images:
                raise ValueError(f"duplicate image stem {path.stem!r} in {image_dir}")
            images[path.stem] = path
    pairs: list[DatasetPair] = []
    skipped: list[str] = []
    for stem in sorted(images):
        result = _build_pair(stem, images[stem], gt_dir / f"{stem}.png")
        if isinstance(result, str):
            skipped.append(result)
        else:
            pairs.append(result)
    for gt_path in sorted(gt_dir.glob("*.png")):
        if gt_path.stem not in images:
            skipped.append(f"{gt_path.stem}: ground truth has no image: {gt_path}")
    return pairs, skipped


def _load_manifest_file(manifest_path: Path) -> tuple[list[DatasetPair], list[str]]:
    base = manifest_path.parent
    pairs: list[DatasetPair] = []
    skipped: list[str] = []
    seen: set[str] = set()
    with open(manifest_path, newline="", encoding="utf-8") as handle:
        for line_no, row in enumerate(csv.reader(handle), start=1):
            if not row or all(not cell.strip() for cell in row):
                continue
            if line_no == 1 and [cell.strip().lower() for cell in row] == ["image", "gt"]:
                continue
            if len(row) != 2:
                skipped.append(f"line {line_no}: expected 'image,gt', got {row!r}")
                continue
            image_path = (base / row[0].strip()).resolve()
            gt_path = (base / row[1].strip()).resolve()
            name = Path(row[0].strip()).stem
            if name in seen:
                skipped.append(f"line {line_no}: duplicate pair name {name!r}")
                continue
            seen.add(name)
            result = _build_pair(name, image_path, gt_path)
            if isinstance(result, str):
                skipped.append(result)
            else:
                pairs.append(result)
    pairs.sort(key=lambda p: p.name)
    return pairs, skipped


def load_dataset(path: str | Path, layout: str = "paired-dirs") -> DatasetManifest:
    """Discover pairs under ``path`` using the given layout.

    Raises ValueError if the layout name is unknown or no usable pair is
    found (skips alone never make an empty dataset acceptable).
    """
    path = Path(path)
    if layout == "paired-dirs":
        if not path.is_dir():
            raise ValueError(f"dataset root is not a directory: {path}")
        pairs, skipped = _load_paired_dirs(path)
        name = path.name or "dataset"
    elif layout == "manifest-file":
        if not path.is_file():
            raise ValueError(f"manifest file not found: {path}")
        pairs, skipped = _load_manifest_file(path)
        name = path.stem
    else:
        raise ValueError(f"unknown dataset layout {layout!r}")
    if not pairs:
        detail = f" ({len(skipped)} entries skipped)" if skipped else ""
        raise ValueError(f"dataset {path} contains no usable image/gt pairs{detail}")
    return DatasetManifest(name=name, pairs=tuple(pairs), skipped=tuple(skipped))
