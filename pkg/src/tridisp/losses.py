"""Self-supervision losses over disparity and log-uncertainty fields.

Four terms, combined as total = l1*photometric + l2*uncertainty + l3*mutual
+ l4*smoothness:

- photometric: mean over the reconstructions of mean (1 - SSIM)/2 over
  their valid pixels.
- uncertainty: heteroscedastic L1, per pixel (sqrt(2)/sigma)*|residual| +
  log(sigma), optimized in the log domain s = log(sigma).
- mutual: per-pixel consistency |d_l - d_r| gated by the uncertainty maps;
  when one side is uncertain (sigma >= t_sigma) the confident side acts as
  a fixed label (no gradient flows into it), and pixels where both sides
  are uncertain are skipped.
- smoothness: edge-aware first-order penalty with an extra constant charge
  K on differences past the discontinuity threshold; the step carries no
  gradient.

Every term returns analytic gradients with respect to the fields it
touches. Per-term sums are divided by pixel (or valid-pixel) counts so
magnitudes are resolution independent and the default weights stay
meaningful across sizes. Accumulation order is fixed, so repeated
evaluation is bit-identical.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Dict, Optional, Tuple

import numpy as np

from .boxfilter import box_sum, window_counts
from .errors import DegenerateInputError
from .grids import DisparityField, Image, MultiscopicFrame, UncertaintyField, _freeze
from .warp import CrossWarpSet, WarpResult, cross_warp

SQRT2 = math.sqrt(2.0)

# reconstruction name -> which disparity/uncertainty pair drives it
_DRIVER = {"cl_l": "l", "cl_r": "r", "cr_r": "r", "cr_l": "l"}
_ALL_RECONS = ("cl_l", "cl_r", "cr_r", "cr_l")
_STEREO_RECONS = ("cl_l", "cr_r")


@dataclass(frozen=True)
class LossWeights:
    """Weighting factors for the four loss terms; all must be >= 0."""

    lambda1: float = 1.0
    lambda2: float = 0.01
    lambda3: float = 0.03
    lambda4: float = 0.03

    def __post_init__(self):
        for name in ("lambda1", "lambda2", "lambda3", "lambda4"):
            if getattr(self, name) < 0:
                raise ValueError(f"{name} must be >= 0")


@dataclass(frozen=True)
class LossConfig:
    ssim_window: int = 5
    ssim_c1: float = 0.01 ** 2
    ssim_c2: float = 0.03 ** 2
    gamma: float = 10.0
    k_discontinuity: float = 10.0
    disc_threshold: float = 0.5
    t_sigma: float = math.e

    def __post_init__(self):
        if self.ssim_window < 3 or self.ssim_window % 2 == 0:
            raise ValueError("ssim_window must be odd and >= 3")
        if self.t_sigma <= 0:
            raise ValueError("t_sigma must be > 0")
        if self.disc_threshold <= 0:
            raise ValueError("disc_threshold must be > 0")


@dataclass(frozen=True, eq=False)
class LossReport:
    """Per-term values, weighted total, and gradients for all four fields."""

    l_p: float
    l_sigma: float
    l_m: float
    l_s: float
    total: float
    grad_d_l: np.ndarray
    grad_d_r: np.ndarray
    grad_s_l: np.ndarray
    grad_s_r: np.ndarray

    def __post_init__(self):
        for name in ("grad_d_l", "grad_d_r", "grad_s_l", "grad_s_r"):
            arr = np.asarray(getattr(self, name), dtype=np.float64)
            if not np.isfinite(arr).all():
                raise ValueError(f"{name} contains non-finite values")
            object.__setattr__(self, name, _freeze(arr))
        for name in ("l_p", "l_sigma", "l_m", "l_s", "total"):
            if not math.isfinite(getattr(self, name)):
                raise ValueError(f"{name} is non-finite")

    def scalars(self) -> Dict[str, float]:
        return {
            "l_p": self.l_p,
            "l_sigma": self.l_sigma,
            "l_m": self.l_m,
            "l_s": self.l_s,
            "total": self.total,
        }


# ---------------------------------------------------------------------------
# SSIM


class SsimContext:
    """Window statistics of a fixed reference image, reusable across compares.

    Local means/variances use a centered box window clipped at borders
    (statistics over the in-image part of the window).
    """

    def __init__(self, ref: np.ndarray, cfg: LossConfig):
        self.cfg = cfg
        self.radius = cfg.ssim_window // 2
        self.ref = ref
        h, w = ref.shape[:2]
        self.n = window_counts(h, w, self.radius)[:, :, None]
        packed = box_sum(np.concatenate([ref, ref * ref], axis=2), self.radius) / self.n
        c = ref.shape[2]
        self.mu_b = packed[:, :, :c]
        self.vb = packed[:, :, c:] - self.mu_b ** 2

    def compare(self, a: np.ndarray) -> "SsimResult":
        cfg = self.cfg
        b = self.ref
        c = b.shape[2]
        packed = box_sum(np.concatenate([a, a * a, a * b], axis=2), self.radius) / self.n
        mu_a = packed[:, :, :c]
        va = packed[:, :, c : 2 * c] - mu_a ** 2
        cov = packed[:, :, 2 * c :] - mu_a * self.mu_b
        n1 = 2.0 * mu_a * self.mu_b + cfg.ssim_c1
        n2 = 2.0 * cov + cfg.ssim_c2
        d1 = mu_a ** 2 + self.mu_b ** 2 + cfg.ssim_c1
        d2 = va + self.vb + cfg.ssim_c2
        per_channel = (n1 * n2) / (d1 * d2)
        return SsimResult(self, a, mu_a, n1, n2, d1, d2, per_channel)


class SsimResult:
    """Per-pixel channel-averaged SSIM plus a vector-Jacobian product."""

    def __init__(self, ctx, a, mu_a, n1, n2, d1, d2, per_channel):
        self._ctx = ctx
        self._a = a
        self._mu_a = mu_a
        self._n1 = n1
        self._n2 = n2
        self._d1 = d1
        self._d2 = d2
        self.per_channel = per_channel
        self.values = per_channel.mean(axis=2)

    def vjp(self, upstream: np.ndarray) -> np.ndarray:
        """Gradient of sum(upstream * values) with respect to the compared image."""
        ctx = self._ctx
        c = self._a.shape[2]
        u = upstream[:, :, None] / (c * ctx.n[:, :, 0][:, :, None])
        s = self.per_channel
        inv_d1d2 = 1.0 / (self._d1 * self._d2)
        d_mu = 2.0 * ctx.mu_b * (self._n2 - self._n1) * inv_d1d2 + 2.0 * self._mu_a * s * (
            1.0 / self._d2 - 1.0 / self._d1
        )
        d_m2 = -s / self._d2
        d_mab = 2.0 * self._n1 * inv_d1d2
        packed = box_sum(np.concatenate([u * d_mu, u * d_m2, u * d_mab], axis=2), ctx.radius)
        return packed[:, :, :c] + 2.0 * self._a * packed[:, :, c : 2 * c] + ctx.ref * packed[:, :, 2 * c :]


def ssim_map(a: Image, b: Image, cfg: LossConfig) -> SsimResult:
    """Per-pixel SSIM of a against b (channel-averaged), with derivative access.

    The returned result exposes .values in [-1, 1] and .vjp(upstream) for the
    gradient with respect to a's pixels.
    """
    if a.data.shape != b.data.shape:
        raise ValueError("ssim_map inputs must share dimensions")
    return SsimContext(b.data, cfg).compare(a.data)


class FrameCache:
    """Per-frame precomputations reused across repeated loss evaluations.

    The center view's SSIM window statistics and the smoothness edge
    weights depend only on the frame and config, not on the fields being
    optimized, so an iterative caller can compute them once.
    """

    def __init__(self, frame: MultiscopicFrame, cfg: LossConfig):
        self.cfg = cfg
        self.ctx = SsimContext(frame.center.data, cfg)
        img = frame.center.data
        self.edge_weight_x = np.exp(-cfg.gamma * np.abs(img[:, 1:] - img[:, :-1]).mean(axis=2))
        self.edge_weight_y = np.exp(-cfg.gamma * np.abs(img[1:, :] - img[:-1, :]).mean(axis=2))


# ---------------------------------------------------------------------------
# Loss terms


def _active_recons(mode: str) -> Tuple[str, ...]:
    if mode == "multiscopic":
        return _ALL_RECONS
    if mode == "stereo":
        return _STEREO_RECONS
    raise ValueError(f"unknown mode {mode!r}")


def photometric_loss(
    warps: CrossWarpSet,
    center: Image,
    cfg: LossConfig,
    mode: str = "multiscopic",
    _ctx: Optional[SsimContext] = None,
) -> Tuple[float, np.ndarray, np.ndarray]:
    """Cross photometric loss: mean over reconstructions of mean (1-SSIM)/2.

    Returns (value, grad wrt d_l, grad wrt d_r). Reconstructions driven by
    d_l contribute only to the d_l gradient, and likewise for d_r.
    """
    names = _active_recons(mode)
    ctx = _ctx if _ctx is not None else SsimContext(center.data, cfg)
    h, w = center.height, center.width
    grads = {"l": np.zeros((h, w)), "r": np.zeros((h, w))}
    value = 0.0
    for name in names:
        res: WarpResult = getattr(warps, name)
        valid = res.valid.data
        nv = int(valid.sum())
        if nv == 0:
            raise DegenerateInputError(f"reconstruction {name}: all warped pixels invalid")
        ssim = ctx.compare(res.image.data)
        value += float(np.sum((1.0 - ssim.values) * 0.5 * valid)) / nv
        upstream = valid * (-0.5 / (nv * len(names)))
        ga = ssim.vjp(upstream)
        grads[_DRIVER[name]] += (ga * res.ddisp).sum(axis=2)
    return value / len(names), grads["l"], grads["r"]


def uncertainty_loss(
    warps: CrossWarpSet,
    center: Image,
    s_l: UncertaintyField,
    s_r: UncertaintyField,
    cfg: LossConfig,
    mode: str = "multiscopic",
) -> Tuple[float, np.ndarray, np.ndarray, np.ndarray, np.ndarray]:
    """Heteroscedastic L1 loss: (sqrt(2)/sigma)*|residual| + log(sigma).

    The residual is the channel-mean absolute difference between a
    reconstruction and the center image; s_l weights the d_l-driven
    reconstructions and s_r the d_r-driven ones. Returns
    (value, grad_d_l, grad_d_r, grad_s_l, grad_s_r).
    """
    names = _active_recons(mode)
    h, w = center.height, center.width
    c = center.channels
    s_data = {"l": s_l.data, "r": s_r.data}
    gd = {"l": np.zeros((h, w)), "r": np.zeros((h, w))}
    gs = {"l": np.zeros((h, w)), "r": np.zeros((h, w))}
    value = 0.0
    for name in names:
        res: WarpResult = getattr(warps, name)
        drv = _DRIVER[name]
        valid = res.valid.data
        nv = int(valid.sum())
        if nv == 0:
            raise DegenerateInputError(f"reconstruction {name}: all warped pixels invalid")
        s = s_data[drv]
        esig = np.exp(-s)
        resid = res.image.data - center.data
        r = np.abs(resid).mean(axis=2)
        term = SQRT2 * esig * r + s
        value += float(np.sum(term * valid)) / nv
        scale = valid / (nv * len(names))
        gs[drv] += (1.0 - SQRT2 * r * esig) * scale
        gd[drv] += (SQRT2 / c) * esig * (np.sign(resid) * res.ddisp).sum(axis=2) * scale
    return value / len(names), gd["l"], gd["r"], gs["l"], gs["r"]


def mutual_loss(
    d_l: DisparityField,
    d_r: DisparityField,
    s_l: UncertaintyField,
    s_r: UncertaintyField,
    cfg: LossConfig,
) -> Tuple[float, np.ndarray, np.ndarray]:
    """Uncertainty-gated consistency between the two disparity fields.

    Per pixel, with sigma = exp(s) and confidence meaning sigma < t_sigma:
    both confident -> |d_l - d_r| with gradients into both fields; exactly
    one confident -> same value, but the confident field is treated as a
    constant label (gradient only into the uncertain field); both uncertain
    -> no contribution. The sum is divided by the total pixel count.
    """
    if d_l.data.shape != d_r.data.shape:
        raise ValueError("mutual_loss fields must share dimensions")
    conf_l = np.exp(s_l.data) < cfg.t_sigma
    conf_r = np.exp(s_r.data) < cfg.t_sigma
    diff = d_l.data - d_r.data
    adiff = np.abs(diff)
    sgn = np.sign(diff)
    both = conf_l & conf_r
    only_l_unc = (~conf_l) & conf_r
    only_r_unc = (~conf_r) & conf_l
    n = diff.size
    # summed per case, then added: keeps per-case bookkeeping reproducible
    total = float(np.sum(adiff[both])) + float(np.sum(adiff[only_l_unc])) + float(np.sum(adiff[only_r_unc]))
    value = total / n
    grad_l = np.where(both | only_l_unc, sgn, 0.0) / n
    grad_r = np.where(both | only_r_unc, -sgn, 0.0) / n
    return value, grad_l, grad_r


def smoothness_loss(
    d: DisparityField,
    center: Image,
    cfg: LossConfig,
    _cache: Optional["FrameCache"] = None,
) -> Tuple[float, np.ndarray]:
    """Edge-aware smoothness of one disparity field.

    Forward differences along x and y; each |difference| t is charged
    f(t) = t + K*[t > threshold], weighted by exp(-gamma * |image
    difference|) so disparity edges aligned with intensity edges are cheap.
    The K step is a constant charge and contributes no gradient. The value
    is the mean over both axes' difference positions.
    """
    if (d.height, d.width) != (center.height, center.width):
        raise ValueError("smoothness_loss dimensions differ")
    if d.height < 2 or d.width < 2:
        raise ValueError("smoothness_loss requires at least 2 pixels per axis")
    dd = d.data
    img = center.data
    grad = np.zeros_like(dd)
    total = 0.0
    count = 0
    for axis in (1, 0):
        if axis == 1:
            dif = dd[:, 1:] - dd[:, :-1]
            weight = (
                _cache.edge_weight_x
                if _cache is not None
                else np.exp(-cfg.gamma * np.abs(img[:, 1:] - img[:, :-1]).mean(axis=2))
            )
        else:
            dif = dd[1:, :] - dd[:-1, :]
            weight = (
                _cache.edge_weight_y
                if _cache is not None
                else np.exp(-cfg.gamma * np.abs(img[1:, :] - img[:-1, :]).mean(axis=2))
            )
        t = np.abs(dif)
        f = t + cfg.k_discontinuity * (t > cfg.disc_threshold)
        total += float(np.sum(f * weight))
        count += dif.size
        g = np.sign(dif) * weight
        if axis == 1:
            grad[:, 1:] += g
            grad[:, :-1] -= g
        else:
            grad[1:, :] += g
            grad[:-1, :] -= g
    return total / count, grad / count


def total_loss(
    frame: MultiscopicFrame,
    d_l: DisparityField,
    d_r: DisparityField,
    s_l: UncertaintyField,
    s_r: UncertaintyField,
    weights: LossWeights,
    cfg: LossConfig,
    mode: str = "multiscopic",
    _cache: Optional[FrameCache] = None,
) -> LossReport:
    """Evaluate all four terms and their gradients in one pass.

    In stereo mode only the two same-pair reconstructions feed the
    photometric and uncertainty terms and the mutual term is dropped
    (weight forced to zero), leaving two decoupled stereo problems plus
    smoothness.
    """
    _active_recons(mode)  # validate mode before doing any work
    warps = cross_warp(frame, d_l, d_r)
    ctx = _cache.ctx if _cache is not None else SsimContext(frame.center.data, cfg)
    l_p, gp_l, gp_r = photometric_loss(warps, frame.center, cfg, mode=mode, _ctx=ctx)
    l_sig, gu_dl, gu_dr, gu_sl, gu_sr = uncertainty_loss(
        warps, frame.center, s_l, s_r, cfg, mode=mode
    )
    lam3 = weights.lambda3 if mode == "multiscopic" else 0.0
    if lam3 > 0.0:
        l_m, gm_l, gm_r = mutual_loss(d_l, d_r, s_l, s_r, cfg)
    else:
        l_m = 0.0
        gm_l = np.zeros_like(d_l.data)
        gm_r = np.zeros_like(d_r.data)
    ls_l, gs_dl = smoothness_loss(d_l, frame.center, cfg, _cache=_cache)
    ls_r, gs_dr = smoothness_loss(d_r, frame.center, cfg, _cache=_cache)
    l_s = ls_l + ls_r
    total = weights.lambda1 * l_p + weights.lambda2 * l_sig + lam3 * l_m + weights.lambda4 * l_s
    return LossReport(
        l_p=l_p,
        l_sigma=l_sig,
        l_m=l_m,
        l_s=l_s,
        total=total,
        grad_d_l=weights.lambda1 * gp_l + weights.lambda2 * gu_dl + lam3 * gm_l + weights.lambda4 * gs_dl,
        grad_d_r=weights.lambda1 * gp_r + weights.lambda2 * gu_dr + lam3 * gm_r + weights.lambda4 * gs_dr,
        grad_s_l=weights.lambda2 * gu_sl,
        grad_s_r=weights.lambda2 * gu_sr,
    )
