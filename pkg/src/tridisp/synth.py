"""Procedural multiscopic scenes with exact ground truth.

Scenes are fronto-parallel textured rectangles over a textured background
plane. Each surface sits at a constant depth, so its disparity
d = focal * baseline / Z is a single number and the center-view ground
truth is piecewise constant and exact. The three views are rendered by
point-sampling continuous textures with a per-view z-buffer; occlusion
masks come from comparing the center pixel's depth against the z-buffer
of the side view at its warped sample position.

Textures are continuous functions so side views can be sampled at
fractional positions: value noise (bilinear interpolation of a coarse
random grid), diagonal sinusoid stripes, and a product-sinusoid checker.
All have bounded curvature, which keeps backward-warp reconstruction
errors small off occlusions. Surface disparities snap to 1/64 px so they
are exactly representable in float32 when persisted.
"""

from __future__ import annotations

import math
import os
from dataclasses import dataclass, field, replace
from typing import Callable, List, Optional, Tuple

import numpy as np

from .fileio import save_scene
from .grids import DisparityField, Image, Mask, MultiscopicFrame

TEXTURE_KINDS = ("noise", "stripes", "checker")
_NOISE_KNOT = 4  # px between value-noise knots


@dataclass(frozen=True)
class SceneConfig:
    width: int = 256
    height: int = 192
    baseline_m: float = 0.1
    focal_px: float = 160.0
    depth_min_m: float = 1.8
    depth_max_m: float = 12.0
    layer_count: int = 5
    texture: str = "noise"
    seed: int = 0
    d_max: int = 16
    value_bands: bool = False
    integer_disparities: bool = False

    def __post_init__(self):
        if self.width < 16 or self.height < 16:
            raise ValueError("scene must be at least 16x16")
        if self.texture not in TEXTURE_KINDS:
            raise ValueError(f"texture must be one of {TEXTURE_KINDS}")
        if self.layer_count < 0:
            raise ValueError("layer_count must be >= 0")
        if self.depth_min_m > self.depth_max_m:
            raise ValueError("depth_min_m must be <= depth_max_m")
        if self.baseline_m <= 0 or self.focal_px <= 0:
            raise ValueError("baseline and focal must be positive")
        fb = self.focal_px * self.baseline_m
        if self.depth_min_m <= fb / self.d_max:
            raise ValueError(
                f"depth_min_m must exceed focal*baseline/d_max = {fb / self.d_max:.4f} m "
                f"so disparities stay within d_max"
            )


@dataclass
class _Surface:
    disparity: float
    depth: float
    x0: int
    x1: int  # inclusive
    y0: int
    y1: int  # inclusive
    texture: Callable[[np.ndarray, np.ndarray], np.ndarray]


@dataclass
class SceneArtifacts:
    """Frame plus the per-view depth buffers used to derive the masks."""

    frame: MultiscopicFrame
    zbuf_center: np.ndarray
    zbuf_left: np.ndarray
    zbuf_right: np.ndarray
    surfaces: List[_Surface] = field(default_factory=list)


def _value_band(banded: bool, index: int, total: int) -> Tuple[float, float]:
    if not banded:
        return 0.05, 0.95
    gap = 0.04
    span = 0.92 - gap * (total - 1)
    width = span / total
    lo = 0.04 + index * (width + gap)
    return lo, lo + width


def _make_texture(
    rng: np.random.Generator, kind: str, band: Tuple[float, float], pad: float, width: int, height: int
) -> Callable[[np.ndarray, np.ndarray], np.ndarray]:
    lo, hi = band
    if kind == "noise":
        gw = int(math.ceil((width + 2 * pad) / _NOISE_KNOT)) + 3
        gh = int(math.ceil(height / _NOISE_KNOT)) + 3
        grid = rng.uniform(lo, hi, size=(gh, gw, 3))

        def tex(xi: np.ndarray, eta: np.ndarray) -> np.ndarray:
            gx = (xi + pad) / _NOISE_KNOT
            gy = eta / _NOISE_KNOT
            x0 = np.clip(np.floor(gx).astype(np.intp), 0, gw - 2)
            y0 = np.clip(np.floor(gy).astype(np.intp), 0, gh - 2)
            tx = (gx - x0)[..., None]
            ty = (gy - y0)[..., None]
            top = (1 - tx) * grid[y0, x0] + tx * grid[y0, x0 + 1]
            bot = (1 - tx) * grid[y0 + 1, x0] + tx * grid[y0 + 1, x0 + 1]
            return (1 - ty) * top + ty * bot

        return tex

    periods = rng.uniform(10.0, 18.0, size=3)
    phases = rng.uniform(0.0, 30.0, size=(2, 3))
    slope = rng.uniform(0.15, 0.35)
    if kind == "stripes":

        def tex(xi: np.ndarray, eta: np.ndarray) -> np.ndarray:
            t = 0.5 * (
                1.0
                + np.sin(2 * np.pi * (xi[..., None] + slope * eta[..., None] + phases[0]) / periods)
            )
            return lo + t * (hi - lo)

        return tex

    def tex(xi: np.ndarray, eta: np.ndarray) -> np.ndarray:
        sx = np.sin(2 * np.pi * (xi[..., None] + phases[0]) / periods)
        sy = np.sin(2 * np.pi * (eta[..., None] + phases[1]) / periods)
        t = 0.5 * (1.0 + sx * sy)
        return lo + t * (hi - lo)

    return tex


def _snap_64(d: float) -> float:
    """Quantize to 1/64 px (float32-exact) keeping the fraction off the
    integer-grid midpoint, so every surface has a unique nearest integer
    disparity for whole-pixel matching."""
    f64 = int(round(d * 64.0))
    frac = f64 % 64
    if 27 <= frac <= 37:
        f64 += (26 - frac) if frac <= 32 else (38 - frac)
    return f64 / 64.0


def _sample_disparities(rng: np.random.Generator, cfg: SceneConfig) -> Tuple[float, List[float]]:
    fb = cfg.focal_px * cfg.baseline_m
    d_bg = fb / cfg.depth_max_m
    d_hi = fb / cfg.depth_min_m
    if cfg.integer_disparities:
        d_bg = max(1.0, round(d_bg))
        if cfg.layer_count == 0:
            return float(d_bg), []
        lo = int(d_bg) + 1
        hi = int(math.floor(d_hi))
        if hi - lo + 1 < cfg.layer_count:
            raise ValueError("not enough distinct integer disparities for layer_count")
        values = rng.choice(np.arange(lo, hi + 1), size=cfg.layer_count, replace=False)
        return float(d_bg), [float(v) for v in values]
    d_bg = _snap_64(d_bg)
    if cfg.layer_count == 0:
        return d_bg, []
    # keep layers well separated from the background so occlusions matter
    d_lo = d_bg + min(3.0, max(0.75, 0.4 * (d_hi - d_bg)))
    if d_hi <= d_lo:
        raise ValueError("depth range leaves no room for layers above the background")
    slot = (d_hi - d_lo) / cfg.layer_count
    layers = []
    for i in range(cfg.layer_count):
        d = d_lo + (i + rng.uniform(0.15, 0.85)) * slot
        layers.append(_snap_64(d))
    return d_bg, [float(v) for v in rng.permutation(layers)]


def _render_view(surfaces: List[_Surface], shift_sign: int, w: int, h: int) -> Tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Point-sample all surfaces into one view; returns (image, zbuf, disp)."""
    img = np.zeros((h, w, 3))
    zbuf = np.full((h, w), np.inf)
    disp = np.zeros((h, w))
    for s in surfaces:
        shift = shift_sign * s.disparity
        ulo = max(0, int(math.ceil(s.x0 + shift)))
        uhi = min(w - 1, int(math.floor(s.x1 + shift)))
        if ulo > uhi:
            continue
        cols = np.arange(ulo, uhi + 1, dtype=np.float64)
        rows = np.arange(s.y0, s.y1 + 1, dtype=np.float64)
        tex = s.texture(np.broadcast_to(cols[None, :] - shift, (rows.size, cols.size)),
                        np.broadcast_to(rows[:, None], (rows.size, cols.size)))
        zslice = zbuf[s.y0 : s.y1 + 1, ulo : uhi + 1]
        front = s.depth < zslice
        img[s.y0 : s.y1 + 1, ulo : uhi + 1][front] = tex[front]
        disp[s.y0 : s.y1 + 1, ulo : uhi + 1][front] = s.disparity
        zslice[front] = s.depth
    return img, zbuf, disp


def _occlusion_from_zbuf(gt: np.ndarray, zc: np.ndarray, z_side: np.ndarray, sign: int) -> np.ndarray:
    """Center pixels whose warped sample position is covered by a nearer surface."""
    h, w = gt.shape
    x = np.arange(w, dtype=np.float64)[None, :] + sign * gt
    inb = (x >= 0.0) & (x <= w - 1)
    xs = np.where(inb, x, 0.0)
    c0 = np.floor(xs).astype(np.intp)
    frac = xs - c0
    c1 = np.minimum(c0 + 1, w - 1)
    rows = np.arange(h, dtype=np.intp)[:, None]
    z0 = z_side[rows, c0]
    z1 = z_side[rows, c1]
    return inb & ((z0 < zc) | ((frac > 0.0) & (z1 < zc)))


def generate_scene_artifacts(cfg: SceneConfig) -> SceneArtifacts:
    """Render one scene and keep the depth buffers (for diagnostics/tests)."""
    rng = np.random.default_rng(cfg.seed)
    fb = cfg.focal_px * cfg.baseline_m
    d_bg, layer_d = _sample_disparities(rng, cfg)
    n_surf = 1 + len(layer_d)
    pad = cfg.d_max + 2.0
    w, h = cfg.width, cfg.height

    band_order = rng.permutation(n_surf)
    surfaces: List[_Surface] = []
    bg_tex = _make_texture(rng, cfg.texture, _value_band(cfg.value_bands, int(band_order[0]), n_surf), pad, w, h)
    surfaces.append(
        _Surface(
            disparity=d_bg,
            depth=fb / d_bg,
            x0=-int(pad),
            x1=w - 1 + int(pad),
            y0=0,
            y1=h - 1,
            texture=bg_tex,
        )
    )
    for i, d in enumerate(layer_d):
        rw = int(rng.integers(int(0.15 * w), int(0.38 * w) + 1))
        rh = int(rng.integers(int(0.2 * h), int(0.5 * h) + 1))
        x0 = int(rng.integers(2, max(3, w - 2 - rw)))
        y0 = int(rng.integers(2, max(3, h - 2 - rh)))
        tex = _make_texture(rng, cfg.texture, _value_band(cfg.value_bands, int(band_order[i + 1]), n_surf), pad, w, h)
        surfaces.append(
            _Surface(
                disparity=d,
                depth=fb / d,
                x0=x0,
                x1=x0 + rw - 1,
                y0=y0,
                y1=y0 + rh - 1,
                texture=tex,
            )
        )

    img_c, z_c, gt = _render_view(surfaces, 0, w, h)
    img_l, z_l, _ = _render_view(surfaces, +1, w, h)
    img_r, z_r, _ = _render_view(surfaces, -1, w, h)

    occ_l = _occlusion_from_zbuf(gt, z_c, z_l, +1)
    occ_r = _occlusion_from_zbuf(gt, z_c, z_r, -1)

    def quantize(a: np.ndarray) -> np.ndarray:
        return np.rint(np.clip(a, 0.0, 1.0) * 255.0) / 255.0

    frame = MultiscopicFrame(
        left=Image(quantize(img_l)),
        center=Image(quantize(img_c)),
        right=Image(quantize(img_r)),
        baseline_m=cfg.baseline_m,
        focal_px=cfg.focal_px,
        gt_disparity=DisparityField(gt),
        occlusion_left=Mask(occ_l),
        occlusion_right=Mask(occ_r),
    )
    return SceneArtifacts(frame=frame, zbuf_center=z_c, zbuf_left=z_l, zbuf_right=z_r, surfaces=surfaces)


def generate_scene(cfg: SceneConfig) -> MultiscopicFrame:
    """Deterministically render one scene with ground truth and occlusion masks."""
    return generate_scene_artifacts(cfg).frame


def generate_suite(
    n: int,
    base_seed: int,
    out_dir: str,
    cfg: Optional[SceneConfig] = None,
) -> List[str]:
    """Write n scenes (seeds base_seed..base_seed+n-1) under out_dir.

    Layout per scene: scene_<idx>/{left,center,right}.ppm, gt.pfm,
    occ_left.pgm, occ_right.pgm, meta.json. Returns the scene directories.
    """
    if n < 1:
        raise ValueError("scene count must be >= 1")
    template = cfg if cfg is not None else SceneConfig()
    os.makedirs(out_dir, exist_ok=True)
    dirs = []
    for i in range(n):
        scene_cfg = replace(template, seed=base_seed + i)
        frame = generate_scene(scene_cfg)
        scene_dir = os.path.join(out_dir, f"scene_{i:03d}")
        save_scene(
            frame,
            scene_cfg.d_max,
            scene_dir,
            extra_meta={"seed": scene_cfg.seed, "texture": scene_cfg.texture},
        )
        dirs.append(scene_dir)
    return dirs
