"""Per-scene minimization of the total loss over four dense fields.

Instead of training network weights, the loss is minimized directly over
the two disparity fields and two log-uncertainty fields with Adam, on a
coarse-to-fine image pyramid. Disparities are clamped into [0, d_max]
(scaled per pyramid level) after every step; uncertainties live in the
log domain and need no constraint. Everything is deterministic: the same
frame, initial fields, and config produce bit-identical results.
"""

from __future__ import annotations

from dataclasses import dataclass, field as dc_field
from typing import Dict, List, Optional

import numpy as np

from .errors import NumericalError
from .grids import (
    DisparityField,
    MultiscopicFrame,
    UncertaintyField,
    downsample,
    upsample_nearest,
)
from .losses import FrameCache, LossConfig, LossWeights, total_loss


@dataclass(frozen=True)
class RefineConfig:
    iterations: int = 300
    pyramid_levels: int = 3
    lr_d: float = 0.02
    lr_s: float = 0.01
    adam_beta1: float = 0.9
    adam_beta2: float = 0.999
    adam_eps: float = 1e-8
    mode: str = "multiscopic"
    d_max: float = 64.0
    weights: LossWeights = dc_field(default_factory=LossWeights)
    loss_cfg: LossConfig = dc_field(default_factory=LossConfig)

    def __post_init__(self):
        if self.iterations < 1:
            raise ValueError("iterations must be >= 1")
        if self.pyramid_levels < 1:
            raise ValueError("pyramid_levels must be >= 1")
        if self.lr_d <= 0 or self.lr_s <= 0:
            raise ValueError("learning rates must be > 0")
        if self.mode not in ("multiscopic", "stereo"):
            raise ValueError("mode must be 'multiscopic' or 'stereo'")
        if self.d_max <= 0:
            raise ValueError("d_max must be > 0")


@dataclass(frozen=True, eq=False)
class RefineResult:
    d_l: DisparityField
    d_r: DisparityField
    s_l: UncertaintyField
    s_r: UncertaintyField
    loss_trace: List[Dict[str, float]]


class _Adam:
    """Standard Adam with bias correction over one ndarray parameter."""

    def __init__(self, shape, lr: float, cfg: RefineConfig):
        self.lr = lr
        self.b1 = cfg.adam_beta1
        self.b2 = cfg.adam_beta2
        self.eps = cfg.adam_eps
        self.m = np.zeros(shape)
        self.v = np.zeros(shape)
        self.t = 0

    def step(self, param: np.ndarray, grad: np.ndarray) -> np.ndarray:
        self.t += 1
        self.m = self.b1 * self.m + (1.0 - self.b1) * grad
        self.v = self.b2 * self.v + (1.0 - self.b2) * grad * grad
        m_hat = self.m / (1.0 - self.b1 ** self.t)
        v_hat = self.v / (1.0 - self.b2 ** self.t)
        return param - self.lr * m_hat / (np.sqrt(v_hat) + self.eps)


def _frame_pyramid(frame: MultiscopicFrame, levels: int) -> List[MultiscopicFrame]:
    """Finest first; images box-averaged, focal length halved per level."""
    out = [frame]
    cur = frame
    for _ in range(levels - 1):
        if cur.height < 4 or cur.width < 4:
            break
        cur = MultiscopicFrame(
            left=downsample(cur.left),
            center=downsample(cur.center),
            right=downsample(cur.right),
            baseline_m=cur.baseline_m,
            focal_px=cur.focal_px / 2.0,
        )
        out.append(cur)
    return out


def _shrink_to(arr: np.ndarray, height: int, width: int, scale: float) -> np.ndarray:
    """Repeatedly box-halve a field until it matches a pyramid level's shape."""
    from .grids import _box2

    cur = arr
    while cur.shape[0] > height or cur.shape[1] > width:
        cur = _box2(cur) * scale
    if cur.shape != (height, width):
        raise ValueError("field shape is not reachable by halving")
    return cur


def refine(
    frame: MultiscopicFrame,
    init_d_l: DisparityField,
    init_d_r: DisparityField,
    cfg: RefineConfig,
    init_s_l: Optional[UncertaintyField] = None,
    init_s_r: Optional[UncertaintyField] = None,
) -> RefineResult:
    """Adam-refine disparity and uncertainty fields against the total loss.

    Starts at the coarsest pyramid level with box-downsampled initial
    fields, runs cfg.iterations steps per level, then upsamples (disparity
    values doubled) and continues. Log-uncertainties start at zero
    (sigma = 1, confident) unless given. Raises NumericalError naming the
    term and iteration if any loss term turns non-finite.
    """
    hw = (frame.height, frame.width)
    for name, f in (("init_d_l", init_d_l), ("init_d_r", init_d_r)):
        if (f.height, f.width) != hw:
            raise ValueError(f"{name} dimensions differ from frame")
    frames = _frame_pyramid(frame, cfg.pyramid_levels)
    levels = len(frames)

    coarse = frames[-1]
    ch, cw = coarse.height, coarse.width
    d_l = _shrink_to(init_d_l.data, ch, cw, 0.5)
    d_r = _shrink_to(init_d_r.data, ch, cw, 0.5)
    s_l = _shrink_to(init_s_l.data, ch, cw, 1.0) if init_s_l is not None else np.zeros((ch, cw))
    s_r = _shrink_to(init_s_r.data, ch, cw, 1.0) if init_s_r is not None else np.zeros((ch, cw))

    trace: List[Dict[str, float]] = []
    for level in range(levels - 1, -1, -1):
        f = frames[level]
        if level < levels - 1:
            d_l = upsample_nearest(d_l, f.height, f.width) * 2.0
            d_r = upsample_nearest(d_r, f.height, f.width) * 2.0
            s_l = upsample_nearest(s_l, f.height, f.width)
            s_r = upsample_nearest(s_r, f.height, f.width)
        bound = cfg.d_max / (2.0 ** level)
        d_l = np.clip(d_l, 0.0, bound)
        d_r = np.clip(d_r, 0.0, bound)
        cache = FrameCache(f, cfg.loss_cfg)
        shape = (f.height, f.width)
        opt = {
            "d_l": _Adam(shape, cfg.lr_d, cfg),
            "d_r": _Adam(shape, cfg.lr_d, cfg),
            "s_l": _Adam(shape, cfg.lr_s, cfg),
            "s_r": _Adam(shape, cfg.lr_s, cfg),
        }
        for it in range(cfg.iterations):
            try:
                report = total_loss(
                    f,
                    DisparityField(d_l),
                    DisparityField(d_r),
                    UncertaintyField(s_l),
                    UncertaintyField(s_r),
                    cfg.weights,
                    cfg.loss_cfg,
                    mode=cfg.mode,
                    _cache=cache,
                )
            except ValueError as exc:
                # LossReport/field validation names the offending term
                raise NumericalError(
                    f"loss evaluation failed at pyramid level {level}, iteration {it}: {exc}"
                ) from exc
            entry = {"level": float(level), "iteration": float(it)}
            entry.update(report.scalars())
            trace.append(entry)
            d_l = np.clip(opt["d_l"].step(d_l, report.grad_d_l), 0.0, bound)
            d_r = np.clip(opt["d_r"].step(d_r, report.grad_d_r), 0.0, bound)
            s_l = opt["s_l"].step(s_l, report.grad_s_l)
            s_r = opt["s_r"].step(s_r, report.grad_s_r)

    return RefineResult(
        d_l=DisparityField(d_l),
        d_r=DisparityField(d_r),
        s_l=UncertaintyField(s_l),
        s_r=UncertaintyField(s_r),
        loss_trace=trace,
    )
