"""End-to-end runs: matcher initialization, refinement, evaluation, outputs.

In multiscopic mode one aggregated cost volume (both pairs voting)
initializes both disparity fields and refinement uses all four
reconstructions plus the mutual term. In stereo mode each field is
initialized from its own pair's volume and refined with its own
reconstruction only, so no information crosses between the pairs; this is
the baseline the multiscopic mode is compared against.
"""

from __future__ import annotations

import json
import os
from dataclasses import dataclass, field as dc_field, replace
from typing import Dict, Optional

import numpy as np

from .fileio import load_scene, save_pfm
from .grids import DisparityField, MultiscopicFrame
from .losses import LossConfig, LossWeights
from .matcher import build_cost_volume, soft_argmin, wta_disparity
from .metrics import scene_report
from .refine import RefineConfig, RefineResult, refine


@dataclass(frozen=True)
class RunConfig:
    mode: str = "multiscopic"
    d_max: int = 16
    tau: float = 0.05
    init: str = "wta"  # "wta" (parabola sub-pixel) or "soft" (softmax expectation)
    iterations: int = 300
    pyramid_levels: int = 3
    lr_d: float = 0.02
    lr_s: float = 0.01
    weights: LossWeights = dc_field(default_factory=LossWeights)
    loss_cfg: LossConfig = dc_field(default_factory=LossConfig)

    def __post_init__(self):
        if self.mode not in ("multiscopic", "stereo"):
            raise ValueError("mode must be 'multiscopic' or 'stereo'")
        if self.init not in ("wta", "soft"):
            raise ValueError("init must be 'wta' or 'soft'")
        if self.tau <= 0:
            raise ValueError("tau must be > 0")

    def refine_config(self) -> RefineConfig:
        return RefineConfig(
            iterations=self.iterations,
            pyramid_levels=self.pyramid_levels,
            lr_d=self.lr_d,
            lr_s=self.lr_s,
            mode=self.mode,
            d_max=float(self.d_max),
            weights=self.weights,
            loss_cfg=self.loss_cfg,
        )


def _extract(vol, cfg: RunConfig) -> DisparityField:
    return wta_disparity(vol) if cfg.init == "wta" else soft_argmin(vol, cfg.tau)


def initial_fields(frame: MultiscopicFrame, cfg: RunConfig):
    """Matcher initialization for both fields, respecting the run mode."""
    if cfg.mode == "multiscopic":
        vol = build_cost_volume(frame, cfg.d_max, cfg.loss_cfg, sides="both")
        init = _extract(vol, cfg)
        return init, init
    vol_l = build_cost_volume(frame, cfg.d_max, cfg.loss_cfg, sides="left")
    vol_r = build_cost_volume(frame, cfg.d_max, cfg.loss_cfg, sides="right")
    return _extract(vol_l, cfg), _extract(vol_r, cfg)


@dataclass
class RunOutput:
    result: RefineResult
    init_d_l: DisparityField
    init_d_r: DisparityField
    report: Optional[dict]


def run_frame(frame: MultiscopicFrame, cfg: RunConfig) -> RunOutput:
    """Initialize, refine, and (when ground truth is present) evaluate."""
    init_d_l, init_d_r = initial_fields(frame, cfg)
    result = refine(frame, init_d_l, init_d_r, cfg.refine_config())
    report = None
    if frame.gt_disparity is not None:
        report = scene_report(result.d_r, frame.gt_disparity, frame.occlusion_right)
    return RunOutput(result=result, init_d_l=init_d_l, init_d_r=init_d_r, report=report)


def _config_snapshot(cfg: RunConfig, overridden: Dict[str, object]) -> dict:
    w = cfg.weights
    lc = cfg.loss_cfg
    return {
        "mode": cfg.mode,
        "d_max": cfg.d_max,
        "tau": cfg.tau,
        "init": cfg.init,
        "iterations": cfg.iterations,
        "pyramid_levels": cfg.pyramid_levels,
        "lr_d": cfg.lr_d,
        "lr_s": cfg.lr_s,
        "lambda1": w.lambda1,
        "lambda2": w.lambda2,
        "lambda3": w.lambda3,
        "lambda4": w.lambda4,
        "ssim_window": lc.ssim_window,
        "ssim_c1": lc.ssim_c1,
        "ssim_c2": lc.ssim_c2,
        "gamma": lc.gamma,
        "k_discontinuity": lc.k_discontinuity,
        "disc_threshold": lc.disc_threshold,
        "t_sigma": lc.t_sigma,
        "overridden": sorted(overridden),
    }


def _write_json(obj, path: str) -> None:
    with open(path, "w") as f:
        json.dump(obj, f, indent=2, sort_keys=True)
        f.write("\n")


def run_scene_dir(
    scene_dir: str,
    out_dir: str,
    cfg: RunConfig,
    overridden: Optional[Dict[str, object]] = None,
) -> Optional[dict]:
    """Process one scene directory and write all artifacts into out_dir.

    Writes d_l.pfm, d_r.pfm, s_l.pfm, s_r.pfm, trace.json, report.json and
    a config.json snapshot; returns the metrics dict (None without gt).
    """
    frame, meta = load_scene(scene_dir)
    if "d_max" in meta and (overridden is None or "d_max" not in overridden):
        cfg = replace(cfg, d_max=int(meta["d_max"]))
    out = run_frame(frame, cfg)
    os.makedirs(out_dir, exist_ok=True)
    save_pfm(out.result.d_l, os.path.join(out_dir, "d_l.pfm"))
    save_pfm(out.result.d_r, os.path.join(out_dir, "d_r.pfm"))
    save_pfm(out.result.s_l, os.path.join(out_dir, "s_l.pfm"))
    save_pfm(out.result.s_r, os.path.join(out_dir, "s_r.pfm"))
    _write_json(out.result.loss_trace, os.path.join(out_dir, "trace.json"))
    _write_json(out.report, os.path.join(out_dir, "report.json"))
    _write_json(_config_snapshot(cfg, overridden or {}), os.path.join(out_dir, "config.json"))
    return out.report


def aggregate_reports(reports: Dict[str, Optional[dict]]) -> dict:
    """Mean of each metric over scenes (ignoring absent values), plus per-scene."""
    keys = ("epe", "bad05", "bad1", "bad2", "d1_all", "d1_occ")
    agg = {}
    for k in keys:
        vals = [r[k] for r in reports.values() if r is not None and r.get(k) is not None]
        agg[k] = float(np.mean(vals)) if vals else None
    return {"aggregate": agg, "scenes": reports}
