"""Color-mapped rendering of scalar fields."""

from __future__ import annotations

import numpy as np

from .fileio import save_png
from .grids import Image


def jet(t: np.ndarray) -> np.ndarray:
    """Classic jet colormap: blue -> cyan -> yellow -> red over t in [0, 1]."""
    t = np.clip(t, 0.0, 1.0)
    r = np.clip(1.5 - np.abs(4.0 * t - 3.0), 0.0, 1.0)
    g = np.clip(1.5 - np.abs(4.0 * t - 2.0), 0.0, 1.0)
    b = np.clip(1.5 - np.abs(4.0 * t - 1.0), 0.0, 1.0)
    return np.stack([r, g, b], axis=-1)


def colorize(field: np.ndarray, colormap: str = "jet") -> Image:
    """Min-max normalize a 2D field and render it; constant fields map to 0."""
    if colormap != "jet":
        raise ValueError(f"unknown colormap {colormap!r}")
    lo = float(field.min())
    hi = float(field.max())
    t = np.zeros_like(field, dtype=np.float64) if hi == lo else (field - lo) / (hi - lo)
    return Image(jet(t))


def render_field_png(field: np.ndarray, path: str, colormap: str = "jet") -> None:
    save_png(colorize(field, colormap), path)
