"""Backward warping of side views to the center view.

A disparity field d reconstructs the center view from a side view by
horizontal resampling: the left view is sampled at (u + d(u, v), v) and
the right view at (u - d(u, v), v). Sampling is bilinear; since rows are
aligned, the interpolation is effectively 1D along x. Out-of-range samples
are marked invalid (value 0, derivative 0) rather than clamped, so border
pixels drop out of loss averages instead of producing flat-gradient
plateaus. Each reconstruction carries d(value)/d(disparity) per pixel and
channel: the horizontal slope of the interpolant times the shift sign.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Tuple

import numpy as np

from .grids import DisparityField, Image, Mask, MultiscopicFrame, _freeze


@dataclass(frozen=True, eq=False)
class WarpResult:
    image: Image
    valid: Mask
    ddisp: np.ndarray  # (H, W, C): d reconstructed value / d disparity

    def __post_init__(self):
        object.__setattr__(self, "ddisp", _freeze(np.asarray(self.ddisp, dtype=np.float64)))


@dataclass(frozen=True, eq=False)
class CrossWarpSet:
    """The four center-view reconstructions of the cross-warping scheme.

    Naming: cl_* are built from the left view, cr_* from the right view;
    the suffix says which disparity field drove the warp (l or r).
    """

    cl_l: WarpResult  # left view warped by d_l
    cl_r: WarpResult  # left view warped by d_r
    cr_r: WarpResult  # right view warped by d_r
    cr_l: WarpResult  # right view warped by d_l


def sample_bilinear(img: Image, x: float, y: float) -> Tuple[np.ndarray, bool, np.ndarray]:
    """Sample one point; returns (value per channel, valid, d(value)/dx per channel).

    Valid iff 0 <= x <= width-1 and 0 <= y <= height-1. At integer x the
    derivative is the slope of the cell to the right (left cell at the last
    column), matching the convention of the vectorized warp.
    """
    c = img.channels
    if not (0.0 <= x <= img.width - 1 and 0.0 <= y <= img.height - 1):
        return np.zeros(c), False, np.zeros(c)
    x0 = min(int(np.floor(x)), max(img.width - 2, 0))
    y0 = min(int(np.floor(y)), max(img.height - 2, 0))
    x1 = min(x0 + 1, img.width - 1)
    y1 = min(y0 + 1, img.height - 1)
    tx = x - x0
    ty = y - y0
    d = img.data
    top = (1 - tx) * d[y0, x0] + tx * d[y0, x1]
    bot = (1 - tx) * d[y1, x0] + tx * d[y1, x1]
    value = (1 - ty) * top + ty * bot
    slope = (1 - ty) * (d[y0, x1] - d[y0, x0]) + ty * (d[y1, x1] - d[y1, x0])
    return value, True, slope


def warp_to_center(src: Image, disp: DisparityField, side: str) -> WarpResult:
    """Reconstruct the center view from a side view with a disparity field.

    side="left" samples src at u + d, side="right" at u - d; ddisp carries
    the chain-rule sign (+slope for left, -slope for right).
    """
    if side not in ("left", "right"):
        raise ValueError(f"side must be 'left' or 'right', got {side!r}")
    if (src.height, src.width) != (disp.height, disp.width):
        raise ValueError("image and disparity dimensions differ")
    h, w = src.height, src.width
    sign = 1.0 if side == "left" else -1.0
    x = np.arange(w, dtype=np.float64)[None, :] + sign * disp.data
    valid = (x >= 0.0) & (x <= w - 1)
    xs = np.where(valid, x, 0.0)
    x0 = np.floor(xs).astype(np.intp)
    np.clip(x0, 0, max(w - 2, 0), out=x0)
    x1 = np.minimum(x0 + 1, w - 1)
    t = (xs - x0)[:, :, None]
    rows = np.arange(h, dtype=np.intp)[:, None]
    v0 = src.data[rows, x0]
    v1 = src.data[rows, x1]
    vmask = valid[:, :, None]
    value = np.where(vmask, (1.0 - t) * v0 + t * v1, 0.0)
    ddisp = np.where(vmask, sign * (v1 - v0), 0.0)
    return WarpResult(image=Image(value), valid=Mask(valid), ddisp=ddisp)


def cross_warp(frame: MultiscopicFrame, d_l: DisparityField, d_r: DisparityField) -> CrossWarpSet:
    """Warp both side views by both disparity fields (four reconstructions).

    Because all three cameras share the same baseline, either field should
    reconstruct the center view from either side; the two cross
    reconstructions (cl_r, cr_l) are what couple the fields.
    """
    hw = (frame.height, frame.width)
    for name, f in (("d_l", d_l), ("d_r", d_r)):
        if (f.height, f.width) != hw:
            raise ValueError(f"{name} dimensions differ from frame")
    return CrossWarpSet(
        cl_l=warp_to_center(frame.left, d_l, "left"),
        cl_r=warp_to_center(frame.left, d_r, "left"),
        cr_r=warp_to_center(frame.right, d_r, "right"),
        cr_l=warp_to_center(frame.right, d_l, "right"),
    )
