"""Pluggable denoisers: the smoothing function applied once per outer
iteration of the reconstruction loop.

Built-in kinds are classical filters (gaussian, non-local means, median).
The "external" kind shells out to any executable speaking the RDN1 raw
float protocol, which is how a trained CNN denoiser gets attached.
"""

from __future__ import annotations

import struct
import subprocess
from dataclasses import dataclass, field

import numpy as np
from scipy.ndimage import correlate1d, median_filter, uniform_filter

from .degradation import gaussian_kernel_1d

_MAGIC = b"RDN1"
_NDIMAGE_MODE = {"replicate": "nearest", "wrap": "wrap"}


class DenoiseError(RuntimeError):
    pass


@dataclass(frozen=True)
class Denoiser:
    """Denoiser spec: kind in {gaussian, nlm, median, external} + params."""

    kind: str
    params: dict = field(default_factory=dict)
    noise_level: float = 0.0

    def __post_init__(self):
        if self.kind not in ("gaussian", "nlm", "median", "external"):
            raise DenoiseError(f"unknown denoiser kind {self.kind!r}")


@dataclass(frozen=True)
class NoiseSchedule:
    """Per-iteration denoiser strength, decreasing from start to end."""

    sigma_start: float
    sigma_end: float
    steps: int
    spacing: str = "log"

    def __post_init__(self):
        if not (self.sigma_start >= self.sigma_end > 0):
            raise ValueError("need sigma_start >= sigma_end > 0")
        if self.spacing not in ("log", "linear"):
            raise ValueError(f"unknown spacing {self.spacing!r}")

    def sigmas(self) -> np.ndarray:
        if self.steps == 1:
            return np.array([self.sigma_start])
        if self.spacing == "log":
            return np.geomspace(self.sigma_start, self.sigma_end, self.steps)
        return np.linspace(self.sigma_start, self.sigma_end, self.steps)


def gaussian_spatial_std(sigma: float, spatial_scale: float = 25.0) -> float:
    """Spatial kernel std used by the gaussian kind for noise level sigma."""
    return spatial_scale * sigma


def denoise(d: Denoiser, x: np.ndarray, sigma: float | None = None) -> np.ndarray:
    """Apply denoiser `d` at strength `sigma` (defaults to d.noise_level)."""
    x = np.asarray(x, dtype=np.float64)
    if not np.isfinite(x).all():
        raise DenoiseError("non-finite input image")
    if sigma is None:
        sigma = d.noise_level
    if sigma <= 0:
        raise DenoiseError("sigma must be > 0")
    if d.kind == "gaussian":
        std = gaussian_spatial_std(sigma, d.params.get("spatial_scale", 25.0))
        mode = _NDIMAGE_MODE[d.params.get("boundary", "replicate")]
        k1 = gaussian_kernel_1d(std)
        out = correlate1d(x, k1, axis=0, mode=mode)
        return correlate1d(out, k1, axis=1, mode=mode)
    if d.kind == "nlm":
        return _nlm(x, sigma,
                    h_factor=d.params.get("h_factor", 0.6),
                    patch=d.params.get("patch", 5),
                    window=d.params.get("window", 11))
    if d.kind == "median":
        return np.stack(
            [median_filter(x[:, :, c], size=3, mode="nearest")
             for c in range(x.shape[2])], axis=2)
    return external_denoise(d.params["cmd"], x, sigma,
                            timeout=d.params.get("timeout", 60.0))


def _nlm(x: np.ndarray, sigma: float, h_factor: float, patch: int, window: int):
    """Non-local means via window-offset accumulation.

    Patch distances are mean squared differences box-filtered over the patch;
    weights exp(-d2 / h^2) with h = h_factor * sigma.
    """
    h2 = (h_factor * sigma) ** 2
    r = window // 2
    xp = np.pad(x, ((r, r), (r, r), (0, 0)), mode="edge")
    hgt, wid = x.shape[:2]
    num = np.zeros_like(x)
    den = np.zeros(x.shape[:2])
    for dy in range(-r, r + 1):
        for dx in range(-r, r + 1):
            shifted = xp[r + dy:r + dy + hgt, r + dx:r + dx + wid, :]
            d2 = uniform_filter(((x - shifted) ** 2).mean(axis=2),
                                size=patch, mode="nearest")
            wgt = np.exp(-d2 / h2)
            num += wgt[:, :, None] * shifted
            den += wgt
    return num / den[:, :, None]


def _pack_raster(x: np.ndarray, sigma: float) -> bytes:
    h, w, c = x.shape
    header = _MAGIC + struct.pack("<IIIf", w, h, c, sigma)
    return header + x.astype("<f4").tobytes()


def _unpack_raster(blob: bytes) -> np.ndarray:
    if len(blob) < 20 or blob[:4] != _MAGIC:
        raise DenoiseError("external denoiser returned malformed header")
    w, h, c, _sigma = struct.unpack("<IIIf", blob[4:20])
    n = w * h * c
    payload = blob[20:]
    if len(payload) != 4 * n:
        raise DenoiseError(
            f"external denoiser payload length {len(payload)} != {4 * n}")
    return np.frombuffer(payload, dtype="<f4").astype(np.float64).reshape(h, w, c)


def external_denoise(cmd, x: np.ndarray, sigma: float,
                     timeout: float = 60.0) -> np.ndarray:
    """Run an external denoiser over the RDN1 stdin/stdout protocol."""
    x = np.asarray(x, dtype=np.float64)
    if isinstance(cmd, str):
        cmd = cmd.split()
    try:
        proc = subprocess.run(list(cmd), input=_pack_raster(x, sigma),
                              capture_output=True, timeout=timeout)
    except subprocess.TimeoutExpired as exc:
        raise DenoiseError(f"external denoiser timed out after {timeout}s") from exc
    except OSError as exc:
        raise DenoiseError(f"cannot launch external denoiser: {exc}") from exc
    if proc.returncode != 0:
        err = proc.stderr.decode("utf-8", "replace").strip()
        raise DenoiseError(f"external denoiser failed (exit {proc.returncode}): {err}")
    out = _unpack_raster(proc.stdout)
    if out.shape != x.shape:
        raise DenoiseError(
            f"external denoiser changed dimensions: {x.shape} -> {out.shape}")
    return out
