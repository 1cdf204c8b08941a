"""Pixel containers, color conversion, resampling, and 8-bit file I/O.

Images are float64 arrays of shape (height, width, channels) with samples
nominally in [0, 1]. Intermediate computations may wander slightly outside
that range; values are clamped only when written to disk.
"""

from __future__ import annotations

import io
import struct

import numpy as np
from PIL import Image as PILImage

__all__ = [
    "load_image",
    "save_image",
    "bicubic_resize",
    "to_luma",
    "vectorize",
    "from_vector",
]

# BT.601 luma weights
_LUMA = np.array([0.299, 0.587, 0.114])


class ImageError(ValueError):
    pass


def _validate(img: np.ndarray) -> np.ndarray:
    img = np.asarray(img, dtype=np.float64)
    if img.ndim == 2:
        img = img[:, :, None]
    if img.ndim != 3 or img.shape[2] not in (1, 3):
        raise ImageError(f"expected (h, w, 1|3) array, got shape {img.shape}")
    if img.shape[0] < 1 or img.shape[1] < 1:
        raise ImageError("zero-dimension image")
    return img


def load_image(path) -> np.ndarray:
    """Read an 8-bit PNG/PGM/PPM file as a float image in [0, 1]."""
    try:
        with PILImage.open(path) as pim:
            if pim.mode not in ("L", "RGB"):
                if pim.mode in ("I;16", "I", "F"):
                    raise ImageError(f"unsupported bit depth in {path}")
                pim = pim.convert("RGB" if len(pim.getbands()) >= 3 else "L")
            arr = np.asarray(pim, dtype=np.float64) / 255.0
    except ImageError:
        raise
    except Exception as exc:
        raise ImageError(f"cannot read image {path}: {exc}") from exc
    return _validate(arr)


def save_image(img: np.ndarray, path) -> None:
    """Write an image as 8-bit PNG/PGM/PPM (chosen by extension).

    Samples are clamped to [0, 1] and quantized with round-half-up.
    """
    img = _validate(img)
    q = np.floor(np.clip(img, 0.0, 1.0) * 255.0 + 0.5).astype(np.uint8)
    path = str(path)
    ext = path.rsplit(".", 1)[-1].lower() if "." in path else ""
    if ext in ("pgm", "ppm"):
        _write_pnm(q, path)
        return
    if q.shape[2] == 1:
        pim = PILImage.fromarray(q[:, :, 0], mode="L")
    else:
        pim = PILImage.fromarray(q, mode="RGB")
    try:
        pim.save(path)
    except Exception as exc:
        raise ImageError(f"cannot write image {path}: {exc}") from exc


def _write_pnm(q: np.ndarray, path: str) -> None:
    h, w, c = q.shape
    if path.lower().endswith(".pgm"):
        if c != 1:
            q = np.floor(q.astype(np.float64) @ _LUMA + 0.5).astype(np.uint8)[..., None]
        header = f"P5\n{w} {h}\n255\n".encode("ascii")
    else:
        if c == 1:
            q = np.repeat(q, 3, axis=2)
        header = f"P6\n{w} {h}\n255\n".encode("ascii")
    with open(path, "wb") as fh:
        fh.write(header)
        fh.write(q.tobytes())


def to_luma(img: np.ndarray) -> np.ndarray:
    """Collapse an RGB image to one channel with BT.601 weights."""
    img = _validate(img)
    if img.shape[2] == 1:
        return img
    return (img @ _LUMA)[:, :, None]


def vectorize(img: np.ndarray) -> np.ndarray:
    """Flatten an image to a 1-D vector (row-major, channel-interleaved)."""
    return _validate(img).ravel()


def from_vector(vec: np.ndarray, shape) -> np.ndarray:
    """Inverse of vectorize; `shape` is (h, w, c)."""
    vec = np.asarray(vec, dtype=np.float64)
    h, w, c = shape
    if vec.size != h * w * c:
        raise ImageError(f"vector length {vec.size} != {h}x{w}x{c}")
    return vec.reshape(h, w, c)


def _cubic(x: np.ndarray) -> np.ndarray:
    # Catmull-Rom cubic, a = -0.5
    x = np.abs(x)
    x2 = x * x
    x3 = x2 * x
    return np.where(
        x <= 1.0,
        1.5 * x3 - 2.5 * x2 + 1.0,
        np.where(x < 2.0, -0.5 * x3 + 2.5 * x2 - 4.0 * x + 2.0, 0.0),
    )


def _resize_axis_weights(in_size: int, out_size: int):
    ratio = in_size / out_size
    scale = max(ratio, 1.0)  # widen the kernel when downsampling (antialias)
    support = 2.0 * scale
    centers = (np.arange(out_size) + 0.5) * ratio - 0.5
    left = np.floor(centers - support).astype(np.int64) + 1
    ntaps = int(np.ceil(2.0 * support)) + 2
    idx = left[:, None] + np.arange(ntaps)[None, :]
    w = _cubic((centers[:, None] - idx) / scale)
    w /= w.sum(axis=1, keepdims=True)
    idx = np.clip(idx, 0, in_size - 1)  # replicate boundary
    return w, idx


def bicubic_resize(img: np.ndarray, new_w: int, new_h: int) -> np.ndarray:
    """Separable bicubic resize with antialiasing on downscale."""
    img = _validate(img)
    if new_w < 1 or new_h < 1:
        raise ImageError("target size must be >= 1")
    h, w, _ = img.shape
    wv, iv = _resize_axis_weights(h, new_h)
    out = np.einsum("ot,othc->ohc", wv, img[iv, :, :])
    wh, ih = _resize_axis_weights(w, new_w)
    out = np.einsum("ot,hotc->hoc", wh, out[:, ih, :])
    return out
