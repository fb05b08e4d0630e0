import struct

import numpy as np
import pytest

from tridisp import (
    DisparityField,
    FormatError,
    Image,
    Mask,
    load_image,
    load_mask,
    load_pfm,
    load_pfm_raw,
    load_scene,
    save_image,
    save_mask,
    save_pfm,
    save_scene,
)
from tridisp.fileio import save_pnm, save_png


def write_pgm(path, values, w, h, maxval=255):
    with open(path, "wb") as f:
        f.write(b"P5\n%d %d\n%d\n" % (w, h, maxval))
        f.write(bytes(values))


def test_load_pgm_normalizes(tmp_path):
    p = tmp_path / "t.pgm"
    write_pgm(p, [0, 255, 128, 64], 2, 2)
    img = load_image(str(p))
    expected = np.array([0.0, 1.0, 128 / 255, 64 / 255]).reshape(2, 2, 1)
    assert np.array_equal(img.data, expected)


def test_load_all_zero_image(tmp_path):
    p = tmp_path / "z.pgm"
    write_pgm(p, [0, 0, 0, 0], 2, 2)
    img = load_image(str(p))
    assert (img.data == 0.0).all()


def test_truncated_file_raises(tmp_path):
    p = tmp_path / "bad.pgm"
    with open(p, "wb") as f:
        f.write(b"P5\n4 4\n255\n\x00\x01")  # 14 bytes short
    with pytest.raises(FormatError, match="bad.pgm"):
        load_image(str(p))


def test_unsupported_bit_depth_raises(tmp_path):
    p = tmp_path / "deep.pgm"
    with open(p, "wb") as f:
        f.write(b"P5\n2 2\n65535\n" + b"\x00" * 8)
    with pytest.raises(FormatError, match="bit depth"):
        load_image(str(p))


def test_pgm_comments_are_skipped(tmp_path):
    p = tmp_path / "c.pgm"
    with open(p, "wb") as f:
        f.write(b"P5\n# a comment\n2 1\n255\n\x10\x20")
    img = load_image(str(p))
    assert img.data.shape == (1, 2, 1)


def test_ppm_round_trip(tmp_path, rng):
    img = Image(rng.integers(0, 256, size=(7, 5, 3)) / 255.0)
    p = tmp_path / "x.ppm"
    save_pnm(img, str(p))
    back = load_image(str(p))
    assert np.array_equal(img.data, back.data)


def test_png_round_trip(tmp_path, rng):
    img = Image(rng.integers(0, 256, size=(6, 9, 3)) / 255.0)
    p = tmp_path / "x.png"
    save_png(img, str(p))
    back = load_image(str(p))
    assert np.array_equal(img.data, back.data)


def test_16bit_png_rejected(tmp_path, rng):
    from PIL import Image as PILImage

    arr = (rng.integers(0, 65536, size=(4, 4))).astype(np.uint16)
    p = tmp_path / "deep.png"
    PILImage.fromarray(arr).save(p)
    with pytest.raises(FormatError, match="deep.png"):
        load_image(str(p))


def test_loaded_values_stay_in_unit_interval(tmp_path, rng):
    for i in range(5):
        img = Image(rng.integers(0, 256, size=(5, 4, 1)) / 255.0)
        p = tmp_path / f"r{i}.pgm"
        save_image(img, str(p))
        back = load_image(str(p))
        assert back.data.min() >= 0.0 and back.data.max() <= 1.0


def test_missing_file_raises_oserror():
    with pytest.raises(FileNotFoundError):
        load_image("/nonexistent/nope.pgm")


# ---------------------------------------------------------------------------
# PFM


def test_pfm_round_trip_bit_exact(tmp_path, rng):
    field = DisparityField(rng.uniform(0, 50, size=(5, 7)).astype(np.float32))
    p = tmp_path / "d.pfm"
    save_pfm(field, str(p))
    back = load_pfm(str(p))
    assert np.array_equal(field.data, back.data)


def test_pfm_round_trip_property(tmp_path, rng):
    for trial in range(20):
        h, w = rng.integers(1, 20, size=2)
        field = DisparityField(rng.uniform(0, 1000, size=(h, w)).astype(np.float32))
        p = tmp_path / f"p{trial}.pfm"
        save_pfm(field, str(p))
        assert np.array_equal(load_pfm(str(p)).data, field.data)


def test_pfm_big_endian_loads_with_byteswap(tmp_path, rng):
    # independent big-endian writer: positive scale, '>f' samples, bottom-up rows
    values = rng.uniform(0, 9, size=(3, 4)).astype(np.float32)
    p = tmp_path / "be.pfm"
    with open(p, "wb") as f:
        f.write(b"Pf\n4 3\n1.0\n")
        for row in range(2, -1, -1):
            for col in range(4):
                f.write(struct.pack(">f", values[row, col]))
    back = load_pfm(str(p))
    assert np.array_equal(back.data, values.astype(np.float64))


def test_pfm_color_header_rejected(tmp_path):
    p = tmp_path / "c.pfm"
    with open(p, "wb") as f:
        f.write(b"PF\n2 2\n-1.0\n" + b"\x00" * 48)
    with pytest.raises(FormatError, match="3-channel"):
        load_pfm(str(p))


def test_pfm_nan_rejected_on_write(tmp_path):
    with pytest.raises(FormatError):
        save_pfm(np.array([[np.nan]]), str(tmp_path / "bad.pfm"))


def test_pfm_nan_rejected_on_read(tmp_path):
    p = tmp_path / "nan.pfm"
    with open(p, "wb") as f:
        f.write(b"Pf\n1 1\n-1.0\n")
        f.write(struct.pack("<f", float("nan")))
    with pytest.raises(FormatError, match="non-finite"):
        load_pfm_raw(str(p))


def test_pfm_truncated_raster(tmp_path):
    p = tmp_path / "t.pfm"
    with open(p, "wb") as f:
        f.write(b"Pf\n4 4\n-1.0\n" + b"\x00" * 10)
    with pytest.raises(FormatError, match="truncated"):
        load_pfm(str(p))


def test_uncertainty_pfm_via_raw(tmp_path, rng):
    s = rng.normal(size=(4, 6)).astype(np.float32)
    p = tmp_path / "s.pfm"
    save_pfm(s, str(p))
    assert np.array_equal(load_pfm_raw(str(p)), s.astype(np.float64))


# ---------------------------------------------------------------------------
# Masks and scenes


def test_mask_round_trip(tmp_path, rng):
    m = Mask(rng.uniform(size=(6, 5)) > 0.5)
    p = tmp_path / "m.pgm"
    save_mask(m, str(p))
    assert np.array_equal(load_mask(str(p)).data, m.data)


def test_scene_round_trip(tmp_path):
    from conftest import small_scene_cfg
    from tridisp import generate_scene

    frame = generate_scene(small_scene_cfg(seed=7))
    save_scene(frame, 12, str(tmp_path / "s"))
    back, meta = load_scene(str(tmp_path / "s"))
    assert meta["d_max"] == 12
    assert meta["baseline_m"] == frame.baseline_m
    assert np.array_equal(back.center.data, frame.center.data)
    assert np.array_equal(back.occlusion_left.data, frame.occlusion_left.data)
    # gt values snap to 1/64 px so the float32 file round-trips exactly
    assert np.array_equal(back.gt_disparity.data, frame.gt_disparity.data)
