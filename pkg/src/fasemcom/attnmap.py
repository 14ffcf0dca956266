"""Objective/subjective attention heatmaps and per-patch importance levels."""
from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, replace

import numpy as np
from scipy import ndimage

from .errors import AlphaOutOfRange, DegenerateImageWarning, DimensionMismatch, InputError

PROVIDERS = ("file", "spectral_residual", "center_prior")

# spectral residual runs on a downscaled copy whose long side is this many px
SR_WORKING_SIDE = 64
SR_SMOOTH_SIGMA = 3.0
CENTER_PRIOR_SIGMA = 0.3


@dataclass(frozen=True)
class Heatmap:
    values: np.ndarray  # (height, width), row-major, in [0, 1]

    def __post_init__(self):
        v = np.asarray(self.values, dtype=np.float64)
        if v.ndim != 2 or v.size == 0:
            raise InputError(f"heatmap must be a nonempty 2-D raster, got shape {v.shape}")
        if not np.all(np.isfinite(v)) or v.min() < 0.0 or v.max() > 1.0:
            raise InputError("heatmap values must lie in [0, 1]")
        v.setflags(write=False)
        object.__setattr__(self, "values", v)

    @property
    def width(self):
        return self.values.shape[1]

    @property
    def height(self):
        return self.values.shape[0]

    @property
    def size(self):
        return self.width, self.height

    @classmethod
    def zeros(cls, width, height):
        return cls(np.zeros((height, width)))


@dataclass(frozen=True)
class PatchGrid:
    tile_resolution: int = 336
    patch_size: int = 14

    def __post_init__(self):
        if self.tile_resolution < 1 or self.patch_size < 1:
            raise InputError("tile resolution and patch size must be positive")
        if self.tile_resolution % self.patch_size:
            raise InputError(
                f"tile resolution {self.tile_resolution} is not a multiple of patch size {self.patch_size}"
            )

    @property
    def patches_per_side(self):
        return self.tile_resolution // self.patch_size

    @property
    def patch_count(self):
        return self.patches_per_side ** 2


@dataclass(frozen=True)
class PatchWeights:
    grid: PatchGrid
    raw: np.ndarray
    levels: np.ndarray | None = None
    level_count: int | None = None


def normalize(values) -> np.ndarray:
    """Min-max scale to [0, 1]; a constant raster maps to all zeros."""
    v = np.asarray(values, dtype=np.float64)
    lo, hi = v.min(), v.max()
    if hi - lo <= 0.0:
        return np.zeros_like(v)
    return (v - lo) / (hi - lo)


def resample_bilinear(values, out_height, out_width) -> np.ndarray:
    """Bilinear resize on pixel centres; the identity when sizes match."""
    v = np.asarray(values, dtype=np.float64)
    in_h, in_w = v.shape
    if (in_h, in_w) == (out_height, out_width):
        return v.copy()
    ys = (np.arange(out_height) + 0.5) * (in_h / out_height) - 0.5
    xs = (np.arange(out_width) + 0.5) * (in_w / out_width) - 0.5
    yy, xx = np.meshgrid(ys, xs, indexing="ij")
    return ndimage.map_coordinates(v, [yy, xx], order=1, mode="nearest")


def spectral_residual(image) -> np.ndarray:
    """Hou-Zhang spectral residual saliency, min-max normalised."""
    img = np.asarray(image, dtype=np.float64)
    h, w = img.shape
    scale = SR_WORKING_SIDE / max(h, w)
    if scale < 1.0:
        small = ndimage.gaussian_filter(img, sigma=0.5 / scale, mode="nearest")
        small = resample_bilinear(small, max(1, round(h * scale)), max(1, round(w * scale)))
    else:
        small = img
    spectrum = np.fft.fft2(small)
    log_amp = np.log(np.abs(spectrum) + 1e-9)
    phase = np.angle(spectrum)
    residual = log_amp - ndimage.uniform_filter(log_amp, size=3, mode="wrap")
    sal = np.abs(np.fft.ifft2(np.exp(residual + 1j * phase))) ** 2
    sal = ndimage.gaussian_filter(sal, sigma=SR_SMOOTH_SIGMA, mode="nearest")
    return normalize(resample_bilinear(sal, h, w))


def center_prior(width, height) -> np.ndarray:
    sigma = CENTER_PRIOR_SIGMA * min(width, height)
    ys = np.arange(height) - (height - 1) / 2.0
    xs = np.arange(width) - (width - 1) / 2.0
    g = np.exp(-(ys[:, None] ** 2 + xs[None, :] ** 2) / (2.0 * sigma ** 2))
    return normalize(g)


def objective_heatmap(image=None, provider="spectral_residual", source=None) -> Heatmap:
    """Question-independent saliency map of ``image``.

    ``provider="file"`` takes a precomputed raster (array or :class:`Heatmap`)
    in ``source`` and min-max renormalises it. A constant image yields an
    all-zero map and a :class:`DegenerateImageWarning`.
    """
    if provider not in PROVIDERS:
        raise InputError(f"unknown objective provider {provider!r}")
    if provider == "file":
        if source is None:
            raise InputError("file provider needs a heatmap source")
        raster = np.asarray(source.values if isinstance(source, Heatmap) else source, dtype=np.float64)
        if image is not None and np.shape(image) != raster.shape:
            raise DimensionMismatch(f"heatmap {raster.shape} vs image {np.shape(image)}")
        return Heatmap(normalize(raster))
    img = np.asarray(image, dtype=np.float64)
    if img.ndim != 2 or img.size == 0:
        raise InputError("image must be a nonempty grayscale raster")
    if provider == "center_prior":
        return Heatmap(center_prior(img.shape[1], img.shape[0]))
    if np.ptp(img) == 0.0:
        warnings.warn("constant image has no saliency", DegenerateImageWarning, stacklevel=2)
        return Heatmap(np.zeros_like(img))
    return Heatmap(spectral_residual(img))


def subjective_heatmap(image_size, boxes) -> Heatmap:
    """Binary mask: 1 inside any box (x0, y0, x1, y1), 0 elsewhere."""
    width, height = image_size
    mask = np.zeros((height, width))
    for x0, y0, x1, y1 in boxes:
        if not (0 <= x0 < x1 <= width and 0 <= y0 < y1 <= height):
            raise InputError(f"box {(x0, y0, x1, y1)} outside {width}x{height}")
        mask[y0:y1, x0:x1] = 1.0
    return Heatmap(mask)


def fuse(h_obj: Heatmap, h_sub: Heatmap, alpha: float) -> Heatmap:
    if not 0.0 <= alpha <= 1.0:
        raise AlphaOutOfRange(f"alpha={alpha} not in [0, 1]")
    if h_obj.values.shape != h_sub.values.shape:
        raise DimensionMismatch(f"{h_obj.values.shape} vs {h_sub.values.shape}")
    fused = alpha * h_obj.values + (1.0 - alpha) * h_sub.values
    return Heatmap(np.clip(fused, 0.0, 1.0))


def patch_weights(h_a: Heatmap, region, grid: PatchGrid, reduce="mean") -> PatchWeights:
    """Per-patch importance of ``region`` of ``h_a`` once resized to the tile.

    ``region`` is (x0, y0, x1, y1) in heatmap pixels, or None for the whole map.
    Patches are numbered row-major.
    """
    if region is None:
        region = (0, 0, h_a.width, h_a.height)
    x0, y0, x1, y1 = region
    if not (0 <= x0 < x1 <= h_a.width and 0 <= y0 < y1 <= h_a.height):
        raise DimensionMismatch(f"region {region} outside {h_a.width}x{h_a.height} heatmap")
    tile = resample_bilinear(h_a.values[y0:y1, x0:x1], grid.tile_resolution, grid.tile_resolution)
    k, s = grid.patches_per_side, grid.patch_size
    blocks = tile.reshape(k, s, k, s)
    if reduce == "mean":
        raw = blocks.mean(axis=(1, 3))
    elif reduce == "max":
        raw = blocks.max(axis=(1, 3))
    else:
        raise InputError(f"unknown patch reduction {reduce!r}")
    return PatchWeights(grid, np.clip(raw.ravel(), 0.0, None))


def quantize(raw, level_count: int) -> np.ndarray:
    """Map raw weights to integer levels 1..L (zero weight -> level 1).

    Positive weights are min-max normalised among themselves; if they are all
    equal they all land on level L.
    """
    if level_count < 2:
        raise InputError("level count must be >= 2")
    raw = np.asarray(raw, dtype=np.float64)
    levels = np.ones(raw.shape, dtype=np.int64)
    pos = raw > 0.0
    if not pos.any():
        return levels
    lo, hi = raw[pos].min(), raw[pos].max()
    if hi == lo:
        levels[pos] = level_count
        return levels
    x = (raw[pos] - lo) / (hi - lo) * (level_count - 1)
    # snap float noise at integer boundaries so the result is scale-free
    near = np.round(x)
    x = np.where((near >= 1) & (np.abs(x - near) < 1e-9), near, x)
    levels[pos] = np.clip(np.ceil(x).astype(np.int64) + 1, 1, level_count)
    return levels


def quantize_levels(weights: PatchWeights, level_count: int = 5) -> PatchWeights:
    return replace(weights, levels=quantize(weights.raw, level_count), level_count=level_count)


def box_coverage(image_size, boxes, region, grid: PatchGrid) -> np.ndarray:
    """Fraction of each tile patch covered by ``boxes`` (resampled like the heatmap)."""
    return patch_weights(subjective_heatmap(image_size, boxes), region, grid).raw
