"""Core raster containers and resampling primitives.

Everything downstream (sampling, prediction, fusion, metrics) moves pixels
through the three container types defined here. All containers hold
read-only numpy arrays so stages can share them without defensive copies:

* :class:`RasterImage` -- 8-bit RGB, shape ``(h, w, 3)``.
* :class:`SaliencyMap` -- float64 grid in ``[0, 1]``, shape ``(h, w)``.
* :class:`BinaryMask`  -- uint8 grid of ``{0, 1}``, shape ``(h, w)``.

Resampling is bilinear with half-pixel-center sampling and edge clamping:
the source coordinate of output pixel ``d`` along an axis of scale
``src/dst`` is ``(d + 0.5) * src / dst - 0.5`` and out-of-range taps clamp
to the border row/column. Byte quantization rounds half up, so a map value
of exactly 0.5 becomes byte 128.
"""

from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path

import numpy as np
from PIL import Image

__all__ = [
    "RasterImage",
    "SaliencyMap",
    "BinaryMask",
    "Region",
    "resize",
    "crop",
    "paste",
    "byte_scale",
    "map_from_bytes",
    "luminance",
    "load_image",
    "load_mask",
    "load_map",
    "save_image",
    "save_map",
]


def _readonly(data: np.ndarray, dtype: np.dtype) -> np.ndarray:
    arr = np.array(data, dtype=dtype, copy=True, order="C")
    arr.setflags(write=False)
    return arr


@dataclass(frozen=True)
class RasterImage:
    """An 8-bit RGB image with shape ``(height, width, 3)``."""

    data: np.ndarray

    def __post_init__(self) -> None:
        arr = np.asarray(self.data)
        if arr.ndim != 3 or arr.shape[2] != 3:
            raise ValueError(f"image data must have shape (h, w, 3), got {arr.shape}")
        if arr.shape[0] < 1 or arr.shape[1] < 1:
            raise ValueError(f"image dimensions must be positive, got {arr.shape}")
        if arr.dtype != np.uint8:
            raise ValueError(f"image data must be uint8, got {arr.dtype}")
        object.__setattr__(self, "data", _readonly(arr, np.dtype(np.uint8)))

    @property
    def width(self) -> int:
        return self.data.shape[1]

    @property
    def height(self) -> int:
        return self.data.shape[0]


@dataclass(frozen=True)
class SaliencyMap:
    """A single-channel float64 map with values in ``[0, 1]``."""

    data: np.ndarray

    def __post_init__(self) -> None:
        arr = np.asarray(self.data, dtype=np.float64)
        if arr.ndim != 2:
            raise ValueError(f"map data must have shape (h, w), got {arr.shape}")
        if arr.shape[0] < 1 or arr.shape[1] < 1:
            raise ValueError(f"map dimensions must be positive, got {arr.shape}")
        if not np.isfinite(arr).all():
            raise ValueError("map values must be finite")
        if arr.min() < 0.0 or arr.max() > 1.0:
            raise ValueError(
                f"map values must lie in [0, 1], got range "
                f"[{arr.min():.6g}, {arr.max():.6g}]"
            )
        object.__setattr__(self, "data", _readonly(arr, np.dtype(np.float64)))

    @property
    def width(self) -> int:
        return self.data.shape[1]

    @property
    def height(self) -> int:
        return self.data.shape[0]


@dataclass(frozen=True)
class BinaryMask:
    """A uint8 grid whose entries are exactly 0 or 1."""

    data: np.ndarray

    def __post_init__(self) -> None:
        arr = np.asarray(self.data)
        if arr.ndim != 2:
            raise ValueError(f"mask data must have shape (h, w), got {arr.shape}")
        if arr.shape[0] < 1 or arr.shape[1] < 1:
            raise ValueError(f"mask dimensions must be positive, got {arr.shape}")
        arr = arr.astype(np.uint8, copy=False)
        if arr.max(initial=0) > 1:
            raise ValueError("mask values must be 0 or 1")
        object.__setattr__(self, "data", _readonly(arr, np.dtype(np.uint8)))

    @property
    def width(self) -> int:
        return self.data.shape[1]

    @property
    def height(self) -> int:
        return self.data.shape[0]


@dataclass(frozen=True)
class Region:
    """An axis-aligned pixel rectangle: top-left ``(x, y)``, size ``(w, h)``."""

    x: int
    y: int
    w: int
    h: int

    def __post_init__(self) -> None:
        for name in ("x", "y", "w", "h"):
            value = getattr(self, name)
            if not isinstance(value, (int, np.integer)):
                raise ValueError(f"region field {name} must be an integer")
            object.__setattr__(self, name, int(value))
        if self.x < 0 or self.y < 0:
            raise ValueError(f"region origin must be non-negative, got ({self.x}, {self.y})")
        if self.w < 1 or self.h < 1:
            raise ValueError(f"region size must be positive, got ({self.w}, {self.h})")

    def contains(self, px: int, py: int) -> bool:
        return self.x <= px < self.x + self.w and self.y <= py < self.y + self.h


def _axis_taps(src_n: int, dst_n: int) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Per-output-pixel source taps and blend fraction for one axis."""
    s = (np.arange(dst_n, dtype=np.float64) + 0.5) * (src_n / dst_n) - 0.5
    lo = np.floor(s)
    frac = s - lo
    i0 = np.clip(lo, 0, src_n - 1).astype(np.intp)
    i1 = np.clip(lo + 1, 0, src_n - 1).astype(np.intp)
    return i0, i1, frac


def _resample(arr: np.ndarray, width: int, height: int) -> np.ndarray:
    """Separable bilinear resample of a float64 (h, w) or (h, w, c) array."""
    x0, x1, fx = _axis_taps(arr.shape[1], width)
    y0, y1, fy = _axis_taps(arr.shape[0], height)
    if arr.ndim == 3:
        fx = fx[None, :, None]
        fy = fy[:, None, None]
    else:
        fx = fx[None, :]
        fy = fy[:, None]
    rows = arr[:, x0] * (1.0 - fx) + arr[:, x1] * fx
    return rows[y0] * (1.0 - fy) + rows[y1] * fy


def resize(source: RasterImage | SaliencyMap, width: int, height: int):
    """Resize an image or map to ``width`` x ``height``.

    Uses bilinear interpolation with half-pixel-center sampling and
    edge-clamped taps. Resizing to the source dimensions returns a
    bitwise-equal copy. Image output rounds half up to uint8; map output
    is clamped back to ``[0, 1]`` to absorb float round-off.
    """
    if width < 1 or height < 1:
        raise ValueError(f"target dimensions must be positive, got {width}x{height}")
    if (width, height) == (source.width, source.height):
        return type(source)(source.data)
    if isinstance(source, RasterImage):
        out = _resample(source.data.astype(np.float64), width, height)
        out = np.clip(np.floor(out + 0.5), 0.0, 255.0).astype(np.uint8)
        return RasterImage(out)
    if isinstance(source, SaliencyMap):
        out = np.clip(_resample(source.data, width, height), 0.0, 1.0)
        return SaliencyMap(out)
    raise ValueError(f"cannot resize object of type {type(source).__name__}")


def _check_inside(region: Region, width: int, height: int) -> None:
    if region.x + region.w > width or region.y + region.h > height:
        raise ValueError(
            f"region {region} exceeds grid bounds {width}x{height}"
        )


def crop(source, region: Region):
    """Extract ``region`` from an image, map, or mask as a new object.

    The region must lie fully inside the source; callers clamp first.
    """
    _check_inside(region, source.width, source.height)
    window = source.data[region.y : region.y + region.h, region.x : region.x + region.w]
    return type(source)(window)


def paste(base, region: Region, patch):
    """Return a copy of ``base`` with ``patch`` written into ``region``."""
    if not isinstance(patch, type(base)):
        raise ValueError(
            f"patch type {type(patch).__name__} does not match base type "
            f"{type(base).__name__}"
        )
    _check_inside(region, base.width, base.height)
    if (patch.width, patch.height) != (region.w, region.h):
        raise ValueError(
            f"patch size {patch.width}x{patch.height} does not match region "
            f"{region.w}x{region.h}"
        )
    out = base.data.copy()
    out[region.y : region.y + region.h, region.x : region.x + region.w] = patch.data
    return type(base)(out)


def byte_scale(source: SaliencyMap | np.ndarray) -> np.ndarray:
    """Quantize map values in [0, 1] to bytes, rounding half up (0.5 -> 128)."""
    arr = source.data if isinstance(source, SaliencyMap) else np.asarray(source, dtype=np.float64)
    return np.clip(np.floor(arr * 255.0 + 0.5), 0.0, 255.0).astype(np.uint8)


def map_from_bytes(values: np.ndarray) -> SaliencyMap:
    """Dequantize a uint8 grid into a SaliencyMap (byte b -> b / 255)."""
    arr = np.asarray(values)
    if arr.dtype != np.uint8:
        raise ValueError(f"byte grid must be uint8, got {arr.dtype}")
    return SaliencyMap(arr.astype(np.float64) / 255.0)


def luminance(image: RasterImage) -> np.ndarray:
    """Rec.601 luminance of an RGB image as a float64 grid in [0, 1]."""
    rgb = image.data.astype(np.float64)
    return (0.299 * rgb[..., 0] + 0.587 * rgb[..., 1] + 0.114 * rgb[..., 2]) / 255.0


def _open_image(path: Path) -> Image.Image:
    try:
        img = Image.open(path)
        img.load()  # force decode so truncated files fail here, not lazily
        return img
    except OSError as err:
        raise OSError(f"failed to load image {path}: {err}") from err


def load_image(path: str | Path) -> RasterImage:
    """Load an RGB image from PNG/JPEG (other modes are converted to RGB)."""
    img = _open_image(Path(path)).convert("RGB")
    return RasterImage(np.asarray(img, dtype=np.uint8))


def load_mask(path: str | Path) -> BinaryMask:
    """Load a ground-truth mask: grayscale bytes above 127 become foreground."""
    img = _open_image(Path(path)).convert("L")
    return BinaryMask((np.asarray(img, dtype=np.uint8) > 127).astype(np.uint8))


def load_map(path: str | Path) -> SaliencyMap:
    """Load a stored saliency map (8-bit grayscale PNG or binary PGM)."""
    img = _open_image(Path(path)).convert("L")
    return map_from_bytes(np.asarray(img, dtype=np.uint8))


def save_image(path: str | Path, image: RasterImage) -> None:
    """Write an RGB image; the format follows the file extension."""
    path = Path(path)
    try:
        Image.fromarray(image.data, mode="RGB").save(path)
    except OSError as err:
        raise OSError(f"failed to save image {path}: {err}") from err


def save_map(path: str | Path, saliency: SaliencyMap) -> None:
    """Write a map as 8-bit grayscale; ``.pgm`` yields binary (P5) PGM."""
    path = Path(path)
    try:
        Image.fromarray(byte_scale(saliency), mode="L").save(path)
    except OSError as err:
        raise OSError(f"failed to save map {path}: {err}") from err
