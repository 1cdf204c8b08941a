import sys
import textwrap

import numpy as np
import pytest

from tinyface.components import ComponentLayout, Region
from tinyface.denoise import Denoiser, NoiseSchedule
from tinyface.pipeline import LayerParams, PipelineConfig
from tinyface.red import RedConfig
from tinyface.synthetic import make_corpus


def tiny_layout() -> ComponentLayout:
    """32x32 analogue of the default 128x128 face layout."""
    return ComponentLayout(
        canvas=(32, 32),
        regions=(
            Region("eyebrows", 6, 8, 20, 4),
            Region("eyes", 6, 12, 20, 4),
            Region("noses", 12, 16, 8, 6),
            Region("mouths", 10, 22, 12, 5),
        ),
    )


def tiny_red(outer_iters: int = 3) -> RedConfig:
    return RedConfig(lam=0.23, outer_iters=outer_iters,
                     schedule=NoiseSchedule(12 / 255, 4 / 255, outer_iters),
                     cg_tol=1e-4, cg_max_iter=40)


def tiny_config(layers=((3, 0.04),), **kw) -> PipelineConfig:
    return PipelineConfig(
        scale=4, red=tiny_red(), layout=tiny_layout(),
        layers=tuple(LayerParams(*l) for l in layers),
        denoiser=Denoiser("gaussian"), **kw)


@pytest.fixture(scope="session")
def tiny_corpus():
    return make_corpus(8, seed=7, size=32)


def write_script(tmp_path, name: str, body: str) -> list:
    """Drop a python helper script; returns the command list to run it."""
    path = tmp_path / name
    path.write_text(textwrap.dedent(body))
    return [sys.executable, str(path)]


RDN1_IDENTITY = """
    import sys
    data = sys.stdin.buffer.read()
    sys.stdout.buffer.write(data)
"""

RDN1_GAUSSIAN = """
    import struct, sys
    import numpy as np
    blob = sys.stdin.buffer.read()
    assert blob[:4] == b"RDN1"
    w, h, c, sigma = struct.unpack("<IIIf", blob[4:20])
    x = np.frombuffer(blob[20:], dtype="<f4").astype(float).reshape(h, w, c)
    std = 25.0 * sigma
    r = int(np.ceil(3.0 * std))
    t = np.arange(-r, r + 1, dtype=float)
    k1 = np.exp(-0.5 * (t / std) ** 2) if r else np.array([1.0])
    k1 /= k1.sum()
    k2 = np.outer(k1, k1)
    xp = np.pad(x, ((r, r), (r, r), (0, 0)), mode="edge")
    out = np.zeros_like(x)
    for dy in range(2 * r + 1):
        for dx in range(2 * r + 1):
            out += k2[dy, dx] * xp[dy:dy + h, dx:dx + w, :]
    sys.stdout.buffer.write(blob[:20])
    sys.stdout.buffer.write(out.astype("<f4").tobytes())
"""
