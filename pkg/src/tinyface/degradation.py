"""Blur-then-decimate degradation operator, its exact adjoint, and the
regularized inner linear solve used by the reconstruction iteration.

The forward map is: replicate-pad, correlate with a normalized kernel,
then keep every s-th pixel starting at offset floor(s/2). The adjoint is
assembled from the adjoint of each stage so the dot-product identity
<Hx, y> == <x, H^T y> holds to machine precision.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy.signal import fftconvolve


class DegradationError(ValueError):
    pass


@dataclass(frozen=True)
class CgResult:
    x: np.ndarray
    residuals: tuple  # |r| after each CG iteration, including the initial one
    rel_residual: float
    iterations: int


@dataclass(frozen=True)
class DegradationOperator:
    """Linear HR -> LR map: normalized blur kernel + integer decimation."""

    kernel: np.ndarray
    scale: int
    boundary: str = "replicate"

    def __post_init__(self):
        k = np.asarray(self.kernel, dtype=np.float64)
        if k.ndim != 2 or k.shape[0] % 2 == 0 or k.shape[1] % 2 == 0:
            raise DegradationError("kernel must be 2-D with odd side lengths")
        if abs(k.sum() - 1.0) > 1e-12:
            raise DegradationError("kernel must sum to 1")
        if self.scale < 1:
            raise DegradationError("scale must be >= 1")
        if self.boundary != "replicate":
            raise DegradationError("only replicate boundary is supported")
        object.__setattr__(self, "kernel", k)


def gaussian_kernel_1d(sigma: float, radius: int | None = None) -> np.ndarray:
    if radius is None:
        radius = int(np.ceil(3.0 * sigma))
    if radius == 0:
        return np.array([1.0])
    t = np.arange(-radius, radius + 1, dtype=np.float64)
    k = np.exp(-0.5 * (t / sigma) ** 2)
    return k / k.sum()


def make_kernel(kind: str, scale: int, sigma: float | None = None) -> np.ndarray:
    """Build a normalized 2-D kernel: gaussian, bicubic-antialias, or box."""
    if kind == "gaussian":
        if sigma is None:
            sigma = 0.5 * scale
        k1 = gaussian_kernel_1d(sigma)
    elif kind == "bicubic":
        # the antialiased Catmull-Rom kernel at decimation factor `scale`
        from .image import _cubic

        s = max(scale, 1)
        r = int(np.ceil(2.0 * s))
        t = np.arange(-r, r + 1, dtype=np.float64)
        k1 = _cubic(t / s) / s
        k1 = k1 / k1.sum()
    elif kind == "box":
        side = scale if scale % 2 == 1 else scale + 1
        k1 = np.full(side, 1.0 / side)
    else:
        raise DegradationError(f"unknown kernel kind {kind!r}")
    return np.outer(k1, k1)


def make_operator(scale: int, kind: str = "gaussian",
                  sigma: float | None = None) -> DegradationOperator:
    return DegradationOperator(make_kernel(kind, scale, sigma), scale)


def _pad_amounts(h: int, w: int, op: DegradationOperator):
    kh, kw = op.kernel.shape
    s = op.scale
    return kh // 2, kw // 2, (-h) % s, (-w) % s


def apply(op: DegradationOperator, x: np.ndarray) -> np.ndarray:
    """H x: replicate-pad, correlate with the kernel, decimate."""
    x = np.asarray(x, dtype=np.float64)
    h, w = x.shape[:2]
    kh, kw = op.kernel.shape
    if kh > h or kw > w:
        raise DegradationError("kernel larger than image")
    ph, pw, pb, pr = _pad_amounts(h, w, op)
    xp = np.pad(x, ((ph, ph + pb), (pw, pw + pr), (0, 0)), mode="edge")
    kflip = op.kernel[::-1, ::-1][:, :, None]
    full = fftconvolve(xp, kflip, mode="valid", axes=(0, 1))
    s = op.scale
    return full[s // 2::s, s // 2::s, :]


def adjoint(op: DegradationOperator, y: np.ndarray,
            hr_shape: tuple | None = None) -> np.ndarray:
    """H^T y for the operator whose HR domain has shape `hr_shape` (h, w).

    Defaults to (h_lr * scale, w_lr * scale).
    """
    y = np.asarray(y, dtype=np.float64)
    s = op.scale
    if hr_shape is None:
        hr_shape = (y.shape[0] * s, y.shape[1] * s)
    h, w = hr_shape
    ph, pw, pb, pr = _pad_amounts(h, w, op)
    if (h + pb) // s != y.shape[0] or (w + pr) // s != y.shape[1]:
        raise DegradationError(
            f"LR shape {y.shape[:2]} inconsistent with HR shape {(h, w)}")
    up = np.zeros((h + pb, w + pr, y.shape[2]))
    up[s // 2::s, s // 2::s, :] = y
    full = fftconvolve(up, op.kernel[:, :, None], mode="full", axes=(0, 1))
    return _fold_pad(full, ph, ph + pb, pw, pw + pr)


def _fold_pad(a: np.ndarray, top: int, bottom: int, left: int, right: int):
    # adjoint of replicate padding: padded rows/cols sum back onto the edges
    if top:
        a[top] += a[:top].sum(axis=0)
    if bottom:
        a[-bottom - 1] += a[-bottom:].sum(axis=0)
    a = a[top:a.shape[0] - bottom]
    if left:
        a[:, left] += a[:, :left].sum(axis=1)
    if right:
        a[:, -right - 1] += a[:, -right:].sum(axis=1)
    return a[:, left:a.shape[1] - right].copy()


def solve_regularized(op: DegradationOperator, y: np.ndarray, z: np.ndarray,
                      lam: float, cg_tol: float = 1e-6,
                      cg_max_iter: int = 200) -> CgResult:
    """Conjugate-gradient solve of (H^T H + lam I) x = H^T y + lam z.

    Starts from x0 = z and stops when the relative residual drops below
    cg_tol. The system matrix is symmetric positive definite for lam > 0,
    so a sharply growing residual signals a broken operator.
    """
    if lam <= 0:
        raise DegradationError("lam must be > 0")
    y = np.asarray(y, dtype=np.float64)
    z = np.asarray(z, dtype=np.float64)
    if not (np.isfinite(y).all() and np.isfinite(z).all()):
        raise DegradationError("non-finite inputs")
    hr = z.shape[:2]

    def mat(v):
        return adjoint(op, apply(op, v), hr) + lam * v

    b = adjoint(op, y, hr) + lam * z
    bnorm = float(np.linalg.norm(b))
    x = z.copy()
    r = b - mat(x)
    p = r.copy()
    rs = float(np.vdot(r, r).real)
    residuals = [np.sqrt(rs)]
    it = 0
    while it < cg_max_iter and residuals[-1] > cg_tol * max(bnorm, 1e-300):
        ap = mat(p)
        alpha = rs / float(np.vdot(p, ap).real)
        x = x + alpha * p
        r = r - alpha * ap
        rs_new = float(np.vdot(r, r).real)
        if not np.isfinite(rs_new) or rs_new > 1e8 * rs:
            raise DegradationError("CG diverged: system not SPD?")
        p = r + (rs_new / rs) * p
        rs = rs_new
        residuals.append(np.sqrt(rs))
        it += 1
    rel = residuals[-1] / max(bnorm, 1e-300)
    return CgResult(x=x, residuals=tuple(residuals), rel_residual=rel,
                    iterations=it)
