"""Acceptance suite: one test per release criterion, each printing a verdict.

The 20-scene evaluation suite is generated once per session at the standard
256x192 evaluation size. End-to-end runs use the calibrated evaluation
configuration (60 iterations on a 2-level pyramid), well inside the
per-scene time budget.
"""

import json
import math
import os
import time

import numpy as np
import pytest

from tridisp import (
    DisparityField,
    Image,
    LossConfig,
    LossWeights,
    MultiscopicFrame,
    SceneConfig,
    UncertaintyField,
    d1,
    generate_suite,
    load_scene,
    mutual_loss,
    smoothness_loss,
    ssim_map,
    total_loss,
    warp_to_center,
)
from tridisp.cli import main as cli_main
from tridisp.pipeline import RunConfig, run_frame
from tridisp.synth import generate_scene_artifacts

N_SCENES = 20
BASE_SEED = 1000
EVAL_CFG = dict(iterations=60, pyramid_levels=2, d_max=16)
CFG = LossConfig()
WEIGHTS = LossWeights()


@pytest.fixture(scope="session")
def suite_dir(tmp_path_factory):
    out = str(tmp_path_factory.mktemp("acceptance") / "scenes")
    generate_suite(N_SCENES, BASE_SEED, out, SceneConfig())
    return out


@pytest.fixture(scope="session")
def suite_frames(suite_dir):
    frames = []
    for i in range(N_SCENES):
        frame, _ = load_scene(os.path.join(suite_dir, f"scene_{i:03d}"))
        frames.append(frame)
    return frames


@pytest.fixture(scope="session")
def multiscopic_runs(suite_frames):
    """Matcher + multiscopic refinement on every scene, with wall times."""
    runs = []
    for frame in suite_frames:
        t0 = time.perf_counter()
        out = run_frame(frame, RunConfig(mode="multiscopic", **EVAL_CFG))
        runs.append((out, time.perf_counter() - t0))
    return runs


# ---------------------------------------------------------------------------
# Criterion 1: analytic gradients match finite differences


def _mutual_frozen_labels(dl, dr, dl0, dr0, sl, sr):
    """Mutual term with stop-gradient labels held at their original values."""
    conf_l = np.exp(sl) < CFG.t_sigma
    conf_r = np.exp(sr) < CFG.t_sigma
    v = np.where(conf_l & conf_r, np.abs(dl - dr), 0.0)
    v = v + np.where((~conf_l) & conf_r, np.abs(dl - dr0), 0.0)
    v = v + np.where((~conf_r) & conf_l, np.abs(dr - dl0), 0.0)
    return float(v.sum()) / v.size


def _total_with_frozen_labels(frame, dl, dr, sl, sr, dl0, dr0):
    w0 = LossWeights(WEIGHTS.lambda1, WEIGHTS.lambda2, 0.0, WEIGHTS.lambda4)
    rep = total_loss(
        frame,
        DisparityField(dl),
        DisparityField(dr),
        UncertaintyField(sl),
        UncertaintyField(sr),
        w0,
        CFG,
    )
    return rep.total + WEIGHTS.lambda3 * _mutual_frozen_labels(dl, dr, dl0, dr0, sl, sr)


def _safe_pixels(dl, dr, sl, sr, resid_floor):
    """Pixels whose +-h perturbation cannot cross a kink or case boundary."""
    safe = np.abs(dl - dr) > 5e-3
    safe &= np.abs(np.exp(sl) - CFG.t_sigma) > 5e-2
    safe &= np.abs(np.exp(sr) - CFG.t_sigma) > 5e-2
    for d in (dl, dr):
        for shifted in (
            np.pad(d, ((0, 0), (0, 1)), mode="edge")[:, 1:],
            np.pad(d, ((0, 0), (1, 0)), mode="edge")[:, :-1],
            np.pad(d, ((0, 1), (0, 0)), mode="edge")[1:, :],
            np.pad(d, ((1, 0), (0, 0)), mode="edge")[:-1, :],
        ):
            diff = np.abs(d - shifted)
            safe &= np.abs(diff - CFG.disc_threshold) > 5e-3  # K-step boundary
            safe &= diff > 5e-3  # |.| kink at zero difference
    safe &= resid_floor
    return safe


def test_criterion_1_gradient_suite():
    rng = np.random.default_rng(2024)
    h_step = 1e-3
    H, W = 12, 16
    worst = 0.0
    checked = 0
    t0 = time.perf_counter()
    for trial in range(50):
        channels = 3 if trial % 2 == 0 else 1
        mk = lambda: Image(rng.uniform(0.05, 0.95, size=(H, W, channels)))
        frame = MultiscopicFrame(
            left=mk(), center=mk(), right=mk(), baseline_m=0.1, focal_px=100.0
        )
        dl0 = rng.integers(0, 3, size=(H, W)) + rng.uniform(0.2, 0.8, size=(H, W))
        dr0 = rng.integers(0, 3, size=(H, W)) + rng.uniform(0.2, 0.8, size=(H, W))
        sl0 = rng.uniform(-1.0, 2.0, size=(H, W))
        sr0 = rng.uniform(-1.0, 2.0, size=(H, W))
        rep = total_loss(
            frame,
            DisparityField(dl0),
            DisparityField(dr0),
            UncertaintyField(sl0),
            UncertaintyField(sr0),
            WEIGHTS,
            CFG,
        )
        grads = {"d_l": rep.grad_d_l, "d_r": rep.grad_d_r, "s_l": rep.grad_s_l, "s_r": rep.grad_s_r}
        arrays = {"d_l": dl0, "d_r": dr0, "s_l": sl0, "s_r": sr0}
        # exclude pixels whose warp residual could change sign under +-h
        from tridisp import cross_warp

        warps = cross_warp(frame, DisparityField(dl0), DisparityField(dr0))
        resid_floor = np.ones((H, W), dtype=bool)
        for name in ("cl_l", "cl_r", "cr_r", "cr_l"):
            res = getattr(warps, name)
            resid = np.abs(res.image.data - frame.center.data)
            resid_floor &= (resid > 5e-3).all(axis=2) | ~res.valid.data
        safe = _safe_pixels(dl0, dr0, sl0, sr0, resid_floor)
        for fname, arr in arrays.items():
            for _ in range(8):
                i, j = rng.integers(0, H), rng.integers(0, W)
                if not safe[i, j]:
                    continue
                base = arr[i, j]

                def ev(v):
                    a = {k: arrays[k].copy() for k in arrays}
                    a[fname][i, j] = v
                    return _total_with_frozen_labels(
                        frame, a["d_l"], a["d_r"], a["s_l"], a["s_r"], dl0, dr0
                    )

                fd = (ev(base + h_step) - ev(base - h_step)) / (2 * h_step)
                an = grads[fname][i, j]
                # noise floor: below ~1e-8 the central difference itself is
                # dominated by truncation error, not by the gradient
                rel = abs(fd - an) / max(abs(fd), abs(an), 1e-8)
                worst = max(worst, rel)
                checked += 1
                assert rel <= 1e-3, f"{fname}[{i},{j}] analytic={an} fd={fd} rel={rel}"
    elapsed = time.perf_counter() - t0
    assert checked >= 800
    assert elapsed < 60.0
    print(
        f"ACCEPTANCE 1 gradient suite: PASS ({checked} checks over 50 frames, "
        f"worst rel err {worst:.2e}, {elapsed:.1f}s)"
    )


# ---------------------------------------------------------------------------
# Criterion 2: loss unit oracles


def test_criterion_2_loss_unit_oracles():
    # (a) optimal sigma for the weighted-L1 uncertainty term
    r = 0.3
    g = lambda sigma: math.sqrt(2) * r / sigma + math.log(sigma)
    phi = (math.sqrt(5) - 1) / 2
    a, b = 1e-4, 10.0
    c, d = b - phi * (b - a), a + phi * (b - a)
    for _ in range(120):
        if g(c) < g(d):
            b, d = d, c
            c = b - phi * (b - a)
        else:
            a, c = c, d
            d = a + phi * (b - a)
    assert (a + b) / 2 == pytest.approx(math.sqrt(2) * r, abs=1e-6)

    # (b) smoothness step charges: 1.0 + K = 11.0 above threshold, 0.4 below
    h, w = 6, 8
    flat = Image(np.full((h, w, 1), 0.5))
    n_pos = h * (w - 1) + (h - 1) * w
    step = np.zeros((h, w))
    step[:, 4:] = 1.0
    v_hi, _ = smoothness_loss(DisparityField(step), flat, CFG)
    assert v_hi == pytest.approx(11.0 * h / n_pos, rel=1e-12)
    step04 = np.zeros((h, w))
    step04[:, 4:] = 0.4
    v_lo, _ = smoothness_loss(DisparityField(step04), flat, CFG)
    assert v_lo == pytest.approx(0.4 * h / n_pos, rel=1e-12)

    # (c) mutual-supervision case table on a single pixel
    one = lambda v: np.full((1, 1), float(v))
    d_l, d_r = DisparityField(one(5)), DisparityField(one(3))
    s_unc = UncertaintyField(one(math.log(3.0)))
    s_conf = UncertaintyField(one(0.0))
    v, g_l, g_r = mutual_loss(d_l, d_r, s_unc, s_conf, CFG)
    assert v == 2.0 and g_l[0, 0] == 1.0 and g_r[0, 0] == 0.0
    v, g_l, g_r = mutual_loss(d_l, d_r, s_conf, s_unc, CFG)
    assert v == 2.0 and g_l[0, 0] == 0.0 and g_r[0, 0] == -1.0
    v, g_l, g_r = mutual_loss(d_l, d_r, s_unc, s_unc, CFG)
    assert v == 0.0 and g_l[0, 0] == 0.0 and g_r[0, 0] == 0.0

    # (d) constant-image SSIM closed form
    c1v, c2v = 0.3, 0.6
    res = ssim_map(Image(np.full((8, 10, 1), c1v)), Image(np.full((8, 10, 1), c2v)), CFG)
    expected = (2 * c1v * c2v + CFG.ssim_c1) / (c1v ** 2 + c2v ** 2 + CFG.ssim_c1)
    assert np.allclose(res.values, expected, rtol=1e-12)
    print("ACCEPTANCE 2 loss unit oracles: PASS (sigma*, step charges, case table, SSIM)")


# ---------------------------------------------------------------------------
# Criterion 3: generator / warp consistency over the suite


def test_criterion_3_warp_generator_consistency(suite_frames):
    worst = 0.0
    for frame in suite_frames:
        gt = frame.gt_disparity
        for side, img, occ in (
            ("left", frame.left, frame.occlusion_left),
            ("right", frame.right, frame.occlusion_right),
        ):
            res = warp_to_center(img, gt, side)
            sel = res.valid.data & ~occ.data
            err = np.abs(res.image.data - frame.center.data).mean(axis=2)
            mae = err[sel].mean()
            worst = max(worst, mae)
            assert mae <= 0.02
    # equal-disparity property: the disparity read back through the left
    # view's depth buffer and through the right view's depth buffer coincide
    # bit-exactly wherever both views see the pixel's own surface
    for i in range(N_SCENES):
        art = generate_scene_artifacts(SceneConfig(seed=BASE_SEED + i))
        frame = art.frame
        fb = frame.focal_px * frame.baseline_m
        gt = frame.gt_disparity.data
        h, w = gt.shape
        rows = np.arange(h)[:, None]
        cols = np.arange(w)[None, :]
        routes = []
        for zbuf, sign in ((art.zbuf_left, +1), (art.zbuf_right, -1)):
            x = cols + sign * gt
            inb = (x >= 0) & (x <= w - 1)
            c0 = np.floor(np.where(inb, x, 0)).astype(int)
            z = zbuf[rows, c0]
            same_surface = inb & (z == art.zbuf_center)
            routes.append((fb / np.where(same_surface, z, 1.0), same_surface))
        both = routes[0][1] & routes[1][1]
        assert both.sum() > 0.5 * gt.size
        assert np.array_equal(routes[0][0][both], routes[1][0][both])
        assert gt.max() <= 16.0
    print(f"ACCEPTANCE 3 warp/generator consistency: PASS (worst masked MAE {worst:.4f} <= 0.02)")


# ---------------------------------------------------------------------------
# Criterion 4: end-to-end quality on the suite


def test_criterion_4_end_to_end_quality(suite_frames, multiscopic_runs):
    good = 0
    times = []
    stats = []
    for frame, (out, elapsed) in zip(suite_frames, multiscopic_runs):
        assert elapsed < 60.0
        times.append(elapsed)
        rep = out.report
        stats.append((rep["epe"], rep["bad2"]))
        if rep["epe"] <= 0.5 and rep["bad2"] <= 5.0:
            good += 1
    assert good >= 18
    worst_epe = max(s[0] for s in stats)
    worst_bad2 = max(s[1] for s in stats)
    print(
        f"ACCEPTANCE 4 end-to-end quality: PASS ({good}/20 scenes meet EPE<=0.5 & Bad2<=5%, "
        f"worst epe {worst_epe:.3f}, worst bad2 {worst_bad2:.2f}%, "
        f"max {max(times):.1f}s/scene)"
    )


# ---------------------------------------------------------------------------
# Criterion 5: multiscopic vs stereo ablation trend


def test_criterion_5_ablation_trend(suite_frames, multiscopic_runs):
    multi = [out.report["d1_occ"] for out, _ in multiscopic_runs]
    stereo = []
    for frame in suite_frames:
        out = run_frame(frame, RunConfig(mode="stereo", **EVAL_CFG))
        stereo.append(out.report["d1_occ"])
    mean_multi = float(np.mean(multi))
    mean_stereo = float(np.mean(stereo))
    assert mean_multi <= 0.5 * mean_stereo
    print(
        f"ACCEPTANCE 5 ablation trend: PASS (mean D1-occ multiscopic {mean_multi:.2f}% "
        f"<= 0.5 x stereo {mean_stereo:.2f}%)"
    )


# ---------------------------------------------------------------------------
# Criterion 6: outlier-metric boundary cases


def test_criterion_6_metric_boundaries():
    one = lambda v: DisparityField(np.full((1, 1), float(v)))
    assert d1(one(104), one(100)) == 0.0  # 4 px on gt 100: within 5%
    assert d1(one(14), one(10)) == 100.0  # 4 px on gt 10: outlier
    print("ACCEPTANCE 6 metric boundaries: PASS (relative tolerance rule)")


# ---------------------------------------------------------------------------
# Criterion 7: run determinism


def test_criterion_7_run_determinism(suite_dir, tmp_path):
    scene = os.path.join(suite_dir, "scene_000")
    out_a = str(tmp_path / "a")
    out_b = str(tmp_path / "b")
    args = ["--iters", "25", "--levels", "2"]
    assert cli_main(["run", scene, "--out", out_a] + args) == 0
    assert cli_main(["run", scene, "--out", out_b] + args) == 0
    for fname in ("d_l.pfm", "d_r.pfm", "s_l.pfm", "s_r.pfm",
                  "trace.json", "report.json", "config.json"):
        with open(os.path.join(out_a, fname), "rb") as fa:
            with open(os.path.join(out_b, fname), "rb") as fb:
                assert fa.read() == fb.read(), fname
    print("ACCEPTANCE 7 determinism: PASS (bit-identical PFM and JSON outputs)")
