"""File I/O: PGM/PPM/PNG images, Middlebury-style PFM float maps, scene dirs.

PGM/PPM are binary (P5/P6) with maxval 255. PFM is the grayscale "Pf"
variant: a float32 raster stored bottom-to-top, with a scale line whose
sign encodes endianness (negative = little-endian). PNG is 8-bit via
Pillow. Disparity and uncertainty fields round-trip losslessly through
PFM for float32-representable values.
"""

from __future__ import annotations

import json
import os
from typing import Optional, Tuple

import numpy as np
from PIL import Image as PILImage

from .errors import FormatError
from .grids import DisparityField, Image, Mask, MultiscopicFrame, UncertaintyField

_SCENE_VIEWS = ("left", "center", "right")


# ---------------------------------------------------------------------------
# PNM (PGM / PPM)


def _read_pnm_token(f) -> bytes:
    """Read one whitespace-delimited header token, skipping '#' comments."""
    tok = b""
    while True:
        ch = f.read(1)
        if ch == b"":
            raise FormatError("unexpected end of PNM header")
        if ch == b"#":
            while ch not in (b"\n", b"", b"\r"):
                ch = f.read(1)
            continue
        if ch.isspace():
            if tok:
                return tok
            continue
        tok += ch


def load_pnm(path: str) -> Image:
    """Load a binary PGM (P5) or PPM (P6) file as a normalized Image."""
    with open(path, "rb") as f:
        magic = f.read(2)
        if magic not in (b"P5", b"P6"):
            raise FormatError(f"{path}: not a binary PGM/PPM file")
        channels = 1 if magic == b"P5" else 3
        width = int(_read_pnm_token(f))
        height = int(_read_pnm_token(f))
        maxval = int(_read_pnm_token(f))
        if maxval != 255:
            raise FormatError(f"{path}: unsupported bit depth (maxval {maxval})")
        count = width * height * channels
        raw = f.read(count)
        if len(raw) != count:
            raise FormatError(f"{path}: truncated pixel data")
    arr = np.frombuffer(raw, dtype=np.uint8).reshape(height, width, channels)
    return Image(arr.astype(np.float64) / 255.0)


def save_pnm(img: Image, path: str) -> None:
    """Write an Image as binary PGM (1 channel) or PPM (3 channels), maxval 255."""
    magic = b"P5" if img.channels == 1 else b"P6"
    quant = np.rint(img.data * 255.0).astype(np.uint8)
    with open(path, "wb") as f:
        f.write(magic + b"\n%d %d\n255\n" % (img.width, img.height))
        f.write(quant.tobytes())


# ---------------------------------------------------------------------------
# PNG (via Pillow)


def load_png(path: str) -> Image:
    pil = PILImage.open(path)
    if pil.mode == "P":
        pil = pil.convert("RGB")
    if pil.mode == "LA":
        pil = pil.convert("L")
    if pil.mode == "RGBA":
        pil = pil.convert("RGB")
    if pil.mode not in ("L", "RGB"):
        raise FormatError(f"{path}: unsupported bit depth or mode ({pil.mode})")
    arr = np.asarray(pil, dtype=np.float64) / 255.0
    return Image(arr)


def save_png(img: Image, path: str) -> None:
    quant = np.rint(img.data * 255.0).astype(np.uint8)
    if img.channels == 1:
        PILImage.fromarray(quant[:, :, 0], mode="L").save(path)
    else:
        PILImage.fromarray(quant, mode="RGB").save(path)


def load_image(path: str) -> Image:
    """Load PGM/PPM/PNG by file content; intensities are normalized to [0, 1].

    Raises FileNotFoundError for missing paths and FormatError for files
    that exist but cannot be decoded (wrong magic, bit depth > 8, truncation).
    """
    with open(path, "rb") as f:
        magic = f.read(2)
    if magic in (b"P5", b"P6"):
        return load_pnm(path)
    if magic == b"\x89P":
        return load_png(path)
    raise FormatError(f"{path}: not a PGM/PPM or PNG file")


def save_image(img: Image, path: str) -> None:
    if path.lower().endswith(".png"):
        save_png(img, path)
    else:
        save_pnm(img, path)


# ---------------------------------------------------------------------------
# PFM


def _read_pfm_array(path: str) -> np.ndarray:
    with open(path, "rb") as f:
        header = f.readline().strip()
        if header == b"PF":
            raise FormatError(f"{path}: 3-channel PFM not supported for scalar fields")
        if header != b"Pf":
            raise FormatError(f"{path}: bad PFM header {header!r}")
        dims = f.readline().split()
        if len(dims) != 2:
            raise FormatError(f"{path}: malformed PFM dimensions line")
        width, height = int(dims[0]), int(dims[1])
        try:
            scale = float(f.readline().strip())
        except ValueError as exc:
            raise FormatError(f"{path}: malformed PFM scale line") from exc
        if scale == 0.0:
            raise FormatError(f"{path}: PFM scale must be nonzero")
        dtype = "<f4" if scale < 0 else ">f4"
        raw = f.read(width * height * 4)
        if len(raw) != width * height * 4:
            raise FormatError(f"{path}: truncated PFM raster")
    arr = np.frombuffer(raw, dtype=dtype).reshape(height, width)
    arr = np.flipud(arr).astype(np.float64)  # stored bottom-to-top
    if not np.isfinite(arr).all():
        raise FormatError(f"{path}: PFM contains non-finite values")
    return arr


def _write_pfm_array(arr: np.ndarray, path: str) -> None:
    if not np.isfinite(arr).all():
        raise FormatError(f"{path}: refusing to write non-finite values")
    data = np.flipud(np.asarray(arr, dtype="<f4"))
    with open(path, "wb") as f:
        f.write(b"Pf\n%d %d\n-1.0\n" % (arr.shape[1], arr.shape[0]))
        f.write(data.tobytes())


def load_pfm(path: str) -> DisparityField:
    """Load a PFM disparity map (grayscale 'Pf', either endianness)."""
    arr = _read_pfm_array(path)
    if arr.min() < 0.0:
        raise FormatError(f"{path}: negative values in disparity PFM")
    return DisparityField(arr)


def save_pfm(field, path: str) -> None:
    """Write a DisparityField or UncertaintyField (or 2D array) as PFM."""
    arr = field.data if hasattr(field, "data") else np.asarray(field)
    _write_pfm_array(arr, path)


def load_pfm_raw(path: str) -> np.ndarray:
    """Load any scalar PFM as a float array (e.g. log-uncertainty maps)."""
    return _read_pfm_array(path)


# ---------------------------------------------------------------------------
# Masks


def save_mask(mask: Mask, path: str) -> None:
    save_pnm(Image(mask.data.astype(np.float64)[:, :, None]), path)


def load_mask(path: str) -> Mask:
    img = load_pnm(path)
    return Mask(img.data[:, :, 0] > 0.5)


# ---------------------------------------------------------------------------
# Scene directories


def save_scene(frame: MultiscopicFrame, d_max: float, out_dir: str, extra_meta: Optional[dict] = None) -> None:
    """Write one scene directory: three PPM views, float gt, masks, metadata."""
    os.makedirs(out_dir, exist_ok=True)
    for name in _SCENE_VIEWS:
        save_pnm(getattr(frame, name), os.path.join(out_dir, f"{name}.ppm"))
    if frame.gt_disparity is not None:
        save_pfm(frame.gt_disparity, os.path.join(out_dir, "gt.pfm"))
    if frame.occlusion_left is not None:
        save_mask(frame.occlusion_left, os.path.join(out_dir, "occ_left.pgm"))
    if frame.occlusion_right is not None:
        save_mask(frame.occlusion_right, os.path.join(out_dir, "occ_right.pgm"))
    meta = {
        "baseline_m": frame.baseline_m,
        "focal_px": frame.focal_px,
        "d_max": d_max,
        "views": [f"{n}.ppm" for n in _SCENE_VIEWS],
    }
    if extra_meta:
        meta.update(extra_meta)
    with open(os.path.join(out_dir, "meta.json"), "w") as f:
        json.dump(meta, f, indent=2, sort_keys=True)
        f.write("\n")


def load_scene(scene_dir: str) -> Tuple[MultiscopicFrame, dict]:
    """Load a scene directory written by save_scene; returns (frame, metadata)."""
    meta_path = os.path.join(scene_dir, "meta.json")
    if not os.path.isfile(meta_path):
        raise FileNotFoundError(f"{scene_dir}: missing meta.json")
    with open(meta_path) as f:
        meta = json.load(f)
    views = {}
    for name in _SCENE_VIEWS:
        views[name] = load_image(os.path.join(scene_dir, f"{name}.ppm"))
    gt = None
    gt_path = os.path.join(scene_dir, "gt.pfm")
    if os.path.isfile(gt_path):
        gt = load_pfm(gt_path)
    masks = {}
    for name in ("occ_left", "occ_right"):
        p = os.path.join(scene_dir, f"{name}.pgm")
        masks[name] = load_mask(p) if os.path.isfile(p) else None
    frame = MultiscopicFrame(
        left=views["left"],
        center=views["center"],
        right=views["right"],
        baseline_m=float(meta["baseline_m"]),
        focal_px=float(meta["focal_px"]),
        gt_disparity=gt,
        occlusion_left=masks["occ_left"],
        occlusion_right=masks["occ_right"],
    )
    return frame, meta
