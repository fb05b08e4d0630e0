"""Cost-volume matching for initial disparity fields.

Costs are (1 - SSIM)/2 between the center view and a side view shifted by
an integer disparity, averaged over the center-left and center-right pairs
wherever both are in view. Because all three cameras share one baseline,
the two pairs vote on the same disparity axis, which keeps the minimum
informative even where one side is occluded or out of view. Sub-pixel
output comes from a parabola fit (winner-take-all) or from a softmax
expectation over negated costs.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import DegenerateInputError
from .grids import DisparityField, MultiscopicFrame, _freeze
from .losses import LossConfig, SsimContext

SENTINEL_COST = 1.0  # (1 - SSIM)/2 never exceeds 1


@dataclass(frozen=True, eq=False)
class CostVolume:
    """Matching cost per (row, column, candidate disparity 0..d_max)."""

    costs: np.ndarray  # (H, W, d_max+1) float
    valid: np.ndarray  # (H, W, d_max+1) bool
    d_max: int

    def __post_init__(self):
        costs = np.asarray(self.costs, dtype=np.float64)
        valid = np.asarray(self.valid, dtype=bool)
        if costs.shape != valid.shape or costs.ndim != 3:
            raise ValueError("costs and valid must share a (H, W, D) shape")
        if costs.shape[2] != self.d_max + 1:
            raise ValueError("third dimension must be d_max + 1")
        if not np.isfinite(costs).all() or costs.min() < 0.0:
            raise ValueError("costs must be finite and >= 0")
        object.__setattr__(self, "costs", _freeze(costs))
        object.__setattr__(self, "valid", _freeze(valid))

    @property
    def height(self) -> int:
        return self.costs.shape[0]

    @property
    def width(self) -> int:
        return self.costs.shape[1]


def _shifted_cost(ctx: SsimContext, view: np.ndarray, d: int, direction: int):
    """Photometric cost of one side view at integer shift d, with validity.

    A pixel's cost is valid only if its whole SSIM window stays clear of
    the out-of-view strip of the shifted image; otherwise the window
    statistics would mix in undefined (zero-filled) samples.
    """
    h, w, c = view.shape
    r = ctx.radius
    shifted = np.zeros_like(view)
    valid = np.zeros((h, w), dtype=bool)
    if d == 0:
        shifted[:] = view
        valid[:] = True
    elif direction > 0:  # sample at u + d: strip is the last d columns
        shifted[:, : w - d] = view[:, d:]
        valid[:, : max(w - d - r, 0)] = True
    else:  # sample at u - d: strip is the first d columns
        shifted[:, d:] = view[:, : w - d]
        valid[:, min(d + r, w) :] = True
    cost = (1.0 - ctx.compare(shifted).values) * 0.5
    return cost, valid


def build_cost_volume(
    frame: MultiscopicFrame,
    d_max: int,
    cfg: LossConfig,
    sides: str = "both",
) -> CostVolume:
    """Sweep integer disparities and average the per-pair photometric costs.

    sides selects which pairs vote: "both" (default), "left", or "right".
    Where only one pair is in view its cost is used alone; cells with no
    in-view pair carry the sentinel max cost and are flagged invalid.
    """
    if d_max < 1 or d_max >= frame.width:
        raise ValueError(f"d_max must be in [1, width), got {d_max}")
    if sides not in ("both", "left", "right"):
        raise ValueError(f"sides must be 'both', 'left' or 'right', got {sides!r}")
    h, w = frame.height, frame.width
    ctx = SsimContext(frame.center.data, cfg)
    use_left = sides in ("both", "left")
    use_right = sides in ("both", "right")
    costs = np.full((h, w, d_max + 1), SENTINEL_COST)
    valid = np.zeros((h, w, d_max + 1), dtype=bool)
    for d in range(d_max + 1):
        acc = np.zeros((h, w))
        cnt = np.zeros((h, w))
        if use_left:
            c_l, v_l = _shifted_cost(ctx, frame.left.data, d, +1)
            acc += np.where(v_l, c_l, 0.0)
            cnt += v_l
        if use_right:
            c_r, v_r = _shifted_cost(ctx, frame.right.data, d, -1)
            acc += np.where(v_r, c_r, 0.0)
            cnt += v_r
        ok = cnt > 0
        costs[:, :, d] = np.where(ok, acc / np.maximum(cnt, 1.0), SENTINEL_COST)
        valid[:, :, d] = ok
    # SSIM can dip below -1 only by rounding; clamp so costs stay in [0, 1]
    np.clip(costs, 0.0, SENTINEL_COST, out=costs)
    return CostVolume(costs=costs, valid=valid, d_max=d_max)


def wta_disparity(vol: CostVolume) -> DisparityField:
    """Winner-take-all disparity with parabola sub-pixel refinement.

    Ties break toward the smaller disparity. The parabola through the
    winner and its two neighbors refines the minimum when both neighbors
    are valid; the offset is clamped into [-0.5, 0.5] by construction.
    """
    costs = np.where(vol.valid, vol.costs, np.inf)
    best = np.argmin(costs, axis=2)
    h, w = vol.height, vol.width
    rows, cols = np.indices((h, w))
    c0 = costs[rows, cols, best]
    offset = np.zeros((h, w))
    if vol.d_max >= 2:
        bi = np.clip(best, 1, vol.d_max - 1)
        cm = costs[rows, cols, bi - 1]
        cp = costs[rows, cols, bi + 1]
        refinable = (
            (best > 0)
            & (best < vol.d_max)
            & np.isfinite(cm)
            & np.isfinite(cp)
            & np.isfinite(c0)
        )
        cm = np.where(refinable, cm, 1.0)
        cp = np.where(refinable, cp, 1.0)
        denom = cm + cp - 2.0 * np.where(refinable, c0, 0.0)
        fit = refinable & (denom > 0)
        offset = np.where(fit, (cm - cp) / np.where(fit, 2.0 * denom, 1.0), 0.0)
    disp = np.where(np.isfinite(c0), best + offset, 0.0)
    return DisparityField(np.clip(disp, 0.0, vol.d_max))


def soft_argmin(vol: CostVolume, tau: float) -> DisparityField:
    """Disparity as the softmax expectation of candidates under -cost/tau.

    Invalid cells are excluded from the softmax; a pixel with no valid cell
    is a degenerate input.
    """
    if tau <= 0:
        raise ValueError("tau must be > 0")
    if not vol.valid.any(axis=2).all():
        raise DegenerateInputError("soft_argmin: some pixel has no valid cost entry")
    z = np.where(vol.valid, -vol.costs / tau, -np.inf)
    z -= z.max(axis=2, keepdims=True)
    p = np.exp(z)
    p[~vol.valid] = 0.0
    d_axis = np.arange(vol.d_max + 1, dtype=np.float64)
    disp = (p * d_axis).sum(axis=2) / p.sum(axis=2)
    return DisparityField(np.clip(disp, 0.0, vol.d_max))
