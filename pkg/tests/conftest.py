import numpy as np
import pytest

from tridisp import Image, MultiscopicFrame, SceneConfig


def random_image(rng, h, w, channels=3, lo=0.05, hi=0.95):
    return Image(rng.uniform(lo, hi, size=(h, w, channels)))


def random_frame(rng, h=12, w=16, channels=3):
    return MultiscopicFrame(
        left=random_image(rng, h, w, channels),
        center=random_image(rng, h, w, channels),
        right=random_image(rng, h, w, channels),
        baseline_m=0.1,
        focal_px=100.0,
    )


def small_scene_cfg(seed=0, **kw):
    """A quick-to-render scene for unit tests (full-size scenes are for acceptance)."""
    defaults = dict(
        width=96,
        height=72,
        baseline_m=0.1,
        focal_px=120.0,
        depth_min_m=1.6,
        depth_max_m=9.0,
        layer_count=3,
        d_max=12,
        seed=seed,
    )
    defaults.update(kw)
    return SceneConfig(**defaults)


@pytest.fixture
def rng():
    return np.random.default_rng(1234)
