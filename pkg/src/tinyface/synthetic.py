"""Parametric "face" generator for desk-scale experiments and tests.

Renders aligned face-like images (oval head, eyebrows, eyes, nose,
mouth) from a low-dimensional parameter vector, at canonical positions
matching components.default_layout(). Being a smooth function of a few
parameters, a corpus of these images forms exactly the kind of manifold
the neighbor embedding step assumes.
"""

from __future__ import annotations

import numpy as np
from scipy.ndimage import gaussian_filter


def random_params(rng: np.random.Generator) -> dict:
    u = rng.uniform
    return {
        "skin": u(0.55, 0.75),
        "bg": u(0.12, 0.32),
        "bg_slope": u(0.0, 0.18),
        "head_rx": u(0.34, 0.38),
        "head_ry": u(0.42, 0.46),
        "eye_sep": u(0.155, 0.175),
        "eye_y": u(0.425, 0.45),
        "eye_rx": u(0.045, 0.062),
        "eye_ry": u(0.022, 0.032),
        "eye_dark": u(0.25, 0.45),
        "pupil": u(0.1, 0.3),
        "brow_y": u(0.30, 0.33),
        "brow_ry": u(0.012, 0.022),
        "brow_dark": u(0.15, 0.35),
        "nose_w": u(0.035, 0.055),
        "nose_len": u(0.08, 0.11),
        "nose_shade": u(0.05, 0.15),
        "mouth_y": u(0.735, 0.77),
        "mouth_rx": u(0.10, 0.15),
        "mouth_ry": u(0.018, 0.032),
        "mouth_dark": u(0.2, 0.4),
    }


def _blob(xx, yy, cx, cy, rx, ry, p=2.0):
    # smooth bump: 1 at center, soft falloff at the (rx, ry) ellipse
    d = ((xx - cx) / rx) ** 2 + ((yy - cy) / ry) ** 2
    return np.exp(-(d ** (p / 2.0)))


def render_face(params: dict, size: int = 128, channels: int = 1) -> np.ndarray:
    """Render one face; all geometry is relative so any size works."""
    p = params
    yy, xx = np.meshgrid(np.arange(size), np.arange(size), indexing="ij")
    xx = (xx + 0.5) / size
    yy = (yy + 0.5) / size

    img = p["bg"] + p["bg_slope"] * yy
    head = _blob(xx, yy, 0.5, 0.52, p["head_rx"], p["head_ry"], p=6.0)
    img = img + (p["skin"] - img) * head

    for sx in (-1.0, 1.0):
        ex = 0.5 + sx * p["eye_sep"]
        img -= p["brow_dark"] * _blob(xx, yy, ex, p["brow_y"],
                                      p["eye_rx"] * 1.15, p["brow_ry"], p=4.0)
        img -= p["eye_dark"] * _blob(xx, yy, ex, p["eye_y"],
                                     p["eye_rx"], p["eye_ry"], p=4.0)
        img -= p["pupil"] * _blob(xx, yy, ex, p["eye_y"],
                                  p["eye_ry"] * 0.8, p["eye_ry"] * 0.8)
    img -= p["nose_shade"] * _blob(xx, yy, 0.5, 0.55 + p["nose_len"] / 2,
                                   p["nose_w"], p["nose_len"], p=3.0)
    img -= p["mouth_dark"] * _blob(xx, yy, 0.5, p["mouth_y"],
                                   p["mouth_rx"], p["mouth_ry"], p=4.0)

    img = gaussian_filter(img, sigma=size / 128.0, mode="nearest")
    img = np.clip(img, 0.0, 1.0)[:, :, None]
    if channels == 3:
        tint = np.array([1.03, 1.0, 0.92])
        img = np.clip(img * tint[None, None, :], 0.0, 1.0)
    return img


def make_corpus(n: int, seed: int = 0, size: int = 128,
                channels: int = 1) -> list:
    """Deterministic list of n rendered faces."""
    rng = np.random.default_rng(seed)
    return [render_face(random_params(rng), size=size, channels=channels)
            for _ in range(n)]


def fixture_config():
    """Tuned 128x128, 8x pipeline config for the synthetic corpus.

    Layer 1 does the heavy lifting here; the corpus manifold is smooth
    enough that one embedding layer reaches the interpolation floor, so
    later layers get a steep locality penalty and act as conservative
    refinements.
    """
    from .denoise import Denoiser, NoiseSchedule
    from .pipeline import LayerParams, PipelineConfig
    from .red import RedConfig

    red = RedConfig(lam=0.23, outer_iters=8,
                    schedule=NoiseSchedule(12 / 255, 3 / 255, 8),
                    cg_tol=1e-4, cg_max_iter=60)
    return PipelineConfig(
        scale=8, red=red,
        layers=(LayerParams(9, 0.04), LayerParams(9, 1e5),
                LayerParams(9, 1e5)),
        denoiser=Denoiser("gaussian"))
