"""Dense 2D grid types and resampling.

All pixel grids use (row, column) storage with the origin at the top-left
corner. Coordinates are (u, v) = (column, row), so a positive horizontal
shift moves right. Values are float64 in memory; file formats quantize on
write (see fileio).
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional

import numpy as np


def _freeze(arr: np.ndarray) -> np.ndarray:
    out = np.ascontiguousarray(arr)
    out.setflags(write=False)
    return out


@dataclass(frozen=True, eq=False)
class Image:
    """Intensity grid in [0, 1], shape (height, width, channels), 1 or 3 channels."""

    data: np.ndarray

    def __post_init__(self):
        arr = np.asarray(self.data, dtype=np.float64)
        if arr.ndim == 2:
            arr = arr[:, :, None]
        if arr.ndim != 3 or arr.shape[2] not in (1, 3):
            raise ValueError(f"image data must be (H, W) or (H, W, 1|3), got {arr.shape}")
        if not np.isfinite(arr).all():
            raise ValueError("image contains non-finite values")
        if arr.min() < 0.0 or arr.max() > 1.0:
            raise ValueError("image intensities must lie in [0, 1]")
        object.__setattr__(self, "data", _freeze(arr))

    @property
    def height(self) -> int:
        return self.data.shape[0]

    @property
    def width(self) -> int:
        return self.data.shape[1]

    @property
    def channels(self) -> int:
        return self.data.shape[2]


@dataclass(frozen=True, eq=False)
class DisparityField:
    """Non-negative horizontal disparities in pixels, shape (height, width)."""

    data: np.ndarray

    def __post_init__(self):
        arr = np.asarray(self.data, dtype=np.float64)
        if arr.ndim != 2:
            raise ValueError(f"disparity data must be 2D, got shape {arr.shape}")
        if not np.isfinite(arr).all():
            raise ValueError("disparity contains non-finite values")
        if arr.min() < 0.0:
            raise ValueError("disparity values must be >= 0")
        object.__setattr__(self, "data", _freeze(arr))

    @property
    def height(self) -> int:
        return self.data.shape[0]

    @property
    def width(self) -> int:
        return self.data.shape[1]


@dataclass(frozen=True, eq=False)
class UncertaintyField:
    """Per-pixel log-uncertainty s = log(sigma); sigma = exp(s) > 0 by construction."""

    data: np.ndarray

    def __post_init__(self):
        arr = np.asarray(self.data, dtype=np.float64)
        if arr.ndim != 2:
            raise ValueError(f"uncertainty data must be 2D, got shape {arr.shape}")
        if not np.isfinite(arr).all():
            raise ValueError("uncertainty contains non-finite values")
        object.__setattr__(self, "data", _freeze(arr))

    @property
    def height(self) -> int:
        return self.data.shape[0]

    @property
    def width(self) -> int:
        return self.data.shape[1]

    def sigma(self) -> np.ndarray:
        return np.exp(self.data)


@dataclass(frozen=True, eq=False)
class Mask:
    """Boolean per-pixel validity grid, shape (height, width)."""

    data: np.ndarray

    def __post_init__(self):
        arr = np.asarray(self.data)
        if arr.dtype != np.bool_:
            arr = arr.astype(bool)
        if arr.ndim != 2:
            raise ValueError(f"mask data must be 2D, got shape {arr.shape}")
        object.__setattr__(self, "data", _freeze(arr))

    @property
    def height(self) -> int:
        return self.data.shape[0]

    @property
    def width(self) -> int:
        return self.data.shape[1]

    def count(self) -> int:
        return int(self.data.sum())


@dataclass(frozen=True, eq=False)
class MultiscopicFrame:
    """Three horizontally aligned views sharing one center-referenced disparity.

    Cameras sit at -baseline, 0, +baseline along the x axis with identical
    focal lengths, so the center-to-left and center-to-right pixel
    disparities of a scene point coincide. The optional ground truth is that
    shared center-view disparity; occlusion masks mark center pixels hidden
    in the respective side view.
    """

    left: Image
    center: Image
    right: Image
    baseline_m: float
    focal_px: float
    gt_disparity: Optional[DisparityField] = None
    occlusion_left: Optional[Mask] = None
    occlusion_right: Optional[Mask] = None

    def __post_init__(self):
        shape = self.center.data.shape
        for name in ("left", "right"):
            if getattr(self, name).data.shape != shape:
                raise ValueError(f"{name} image shape differs from center")
        if self.baseline_m <= 0 or self.focal_px <= 0:
            raise ValueError("baseline and focal length must be positive")
        hw = shape[:2]
        for name in ("gt_disparity", "occlusion_left", "occlusion_right"):
            f = getattr(self, name)
            if f is not None and f.data.shape != hw:
                raise ValueError(f"{name} shape differs from images")

    @property
    def height(self) -> int:
        return self.center.height

    @property
    def width(self) -> int:
        return self.center.width

    @property
    def channels(self) -> int:
        return self.center.channels


def _box2(arr: np.ndarray) -> np.ndarray:
    """Average over 2x2 blocks; trailing odd rows/columns average what exists."""
    h, w = arr.shape[:2]
    h2, w2 = (h + 1) // 2, (w + 1) // 2
    acc = np.zeros((h2, w2) + arr.shape[2:], dtype=np.float64)
    cnt = np.zeros((h2, w2) + (1,) * (arr.ndim - 2), dtype=np.float64)
    for dy in (0, 1):
        for dx in (0, 1):
            sub = arr[dy::2, dx::2]
            acc[: sub.shape[0], : sub.shape[1]] += sub
            cnt[: sub.shape[0], : sub.shape[1]] += 1.0
    return acc / cnt


def downsample(img: Image, factor: int = 2) -> Image:
    """Halve an image with a 2x2 box average."""
    if factor != 2:
        raise ValueError("only factor 2 is supported")
    if img.height < 2 or img.width < 2:
        raise ValueError("image must be at least 2 pixels in each axis")
    return Image(_box2(img.data))


def downsample_disparity(d: DisparityField) -> DisparityField:
    """Halve a disparity field; values are also halved to stay in coarse-grid pixels."""
    if d.height < 2 or d.width < 2:
        raise ValueError("field must be at least 2 pixels in each axis")
    return DisparityField(_box2(d.data) * 0.5)


def upsample_nearest(arr: np.ndarray, height: int, width: int) -> np.ndarray:
    """2x nearest-neighbor upsampling cropped to the requested shape."""
    up = np.repeat(np.repeat(arr, 2, axis=0), 2, axis=1)
    if up.shape[0] < height or up.shape[1] < width:
        raise ValueError("target shape exceeds 2x upsampling")
    return up[:height, :width]
