"""Sliding-window box sums with border clipping.

Windows are centered and clipped to the image, so border statistics are
taken over the in-image part of the window. Implemented with a zero-padded
summed-area table; deterministic for fixed input.
"""

from __future__ import annotations

from functools import lru_cache

import numpy as np


def box_sum(arr: np.ndarray, radius: int) -> np.ndarray:
    """Sum of the (2r+1)^2 window around each pixel, clipped at borders.

    Accepts (H, W) or (H, W, C); channels are summed independently.
    """
    k = 2 * radius + 1
    pad = [(radius + 1, radius), (radius + 1, radius)] + [(0, 0)] * (arr.ndim - 2)
    p = np.pad(np.asarray(arr, dtype=np.float64), pad)
    np.cumsum(p, axis=0, out=p)
    np.cumsum(p, axis=1, out=p)
    return p[k:, k:] - p[:-k, k:] - p[k:, :-k] + p[:-k, :-k]


@lru_cache(maxsize=32)
def window_counts(height: int, width: int, radius: int) -> np.ndarray:
    """Number of in-image pixels in each centered window; read-only, cached."""
    counts = box_sum(np.ones((height, width)), radius)
    counts.setflags(write=False)
    return counts
