"""Disparity evaluation metrics.

EPE is the mean absolute disparity error. Bad-n is the percentage of
pixels with error strictly higher than n pixels. D1 counts a pixel as an
outlier unless its error is smaller than 3 pixels or smaller than 5% of
the true disparity; D1-occ is D1 restricted to occluded pixels. All
inequalities are strict, pinned by tests.
"""

from __future__ import annotations

from typing import Optional

import numpy as np

from .grids import DisparityField, Mask


def _masked_error(est: DisparityField, gt: DisparityField, mask: Optional[Mask]):
    if est.data.shape != gt.data.shape:
        raise ValueError("est and gt dimensions differ")
    err = np.abs(est.data - gt.data)
    if mask is None:
        return err.ravel(), gt.data.ravel()
    if mask.data.shape != est.data.shape:
        raise ValueError("mask dimensions differ from fields")
    if not mask.data.any():
        raise ValueError("mask selects no pixels")
    sel = mask.data
    return err[sel], gt.data[sel]


def epe(est: DisparityField, gt: DisparityField, mask: Optional[Mask] = None) -> float:
    """Mean absolute disparity error over the (optionally masked) pixels."""
    err, _ = _masked_error(est, gt, mask)
    return float(err.mean())


def bad_n(est: DisparityField, gt: DisparityField, n: float, mask: Optional[Mask] = None) -> float:
    """Percentage of pixels with |est - gt| strictly greater than n."""
    err, _ = _masked_error(est, gt, mask)
    return float((err > n).mean() * 100.0)


def d1(est: DisparityField, gt: DisparityField, mask: Optional[Mask] = None) -> float:
    """Outlier percentage: a pixel is correct iff err < 3 px or err < 5% of gt."""
    err, gtv = _masked_error(est, gt, mask)
    outlier = (err >= 3.0) & (err >= 0.05 * gtv)
    return float(outlier.mean() * 100.0)


def d1_occ(est: DisparityField, gt: DisparityField, occlusion: Mask) -> float:
    """D1 restricted to occluded pixels; the occlusion set must be non-empty."""
    if not occlusion.data.any():
        raise ValueError("occlusion mask selects no pixels")
    return d1(est, gt, occlusion)


def scene_report(
    est: DisparityField,
    gt: DisparityField,
    occlusion: Optional[Mask] = None,
) -> dict:
    """Standard six-metric evaluation record.

    epe and bad are computed over non-occluded pixels, d1_all over all
    pixels, d1_occ over occluded pixels (None when the occlusion set is
    empty or absent).
    """
    if occlusion is not None and occlusion.data.any():
        non_occ = Mask(~occlusion.data)
        occ_d1 = d1_occ(est, gt, occlusion)
    else:
        non_occ = None
        occ_d1 = None
    return {
        "epe": epe(est, gt, non_occ),
        "bad05": bad_n(est, gt, 0.5, non_occ),
        "bad1": bad_n(est, gt, 1.0, non_occ),
        "bad2": bad_n(est, gt, 2.0, non_occ),
        "d1_all": d1(est, gt, None),
        "d1_occ": occ_d1,
    }
