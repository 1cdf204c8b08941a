"""Global reconstruction by denoiser-regularized least squares.

Energy:   E(x) = 1/2 ||y - Hx||^2 + (lam/2) x^T (x - h(x))
Gradient: H^T(Hx - y) + lam (x - h(x))
Update:   x_{k+1} = (H^T H + lam I)^{-1} (H^T y + lam h(x_k))

Each outer step freezes the denoiser output and solves the resulting
linear system by conjugate gradient.
"""

from __future__ import annotations

import io
from dataclasses import dataclass, field

import numpy as np

from . import degradation as deg
from .denoise import Denoiser, NoiseSchedule, denoise
from .image import bicubic_resize, vectorize


class RedError(RuntimeError):
    pass


@dataclass(frozen=True)
class RedConfig:
    lam: float = 0.23
    outer_iters: int = 30
    schedule: NoiseSchedule = field(
        default_factory=lambda: NoiseSchedule(12 / 255, 2 / 255, 30))
    cg_tol: float = 1e-6
    cg_max_iter: int = 200
    init: str = "bicubic"
    stop_tol: float = 1e-5  # early stop on relative change; 0 disables

    def __post_init__(self):
        if self.lam <= 0:
            raise RedError("lam must be > 0")
        if self.outer_iters < 1:
            raise RedError("outer_iters must be >= 1")
        if self.schedule.steps != self.outer_iters:
            raise RedError("schedule length must equal outer_iters")
        if self.init not in ("bicubic", "zeros"):
            raise RedError(f"unknown init {self.init!r}")


@dataclass
class RedTrace:
    """Per-iteration solver diagnostics."""

    energy: list = field(default_factory=list)
    grad_norm: list = field(default_factory=list)
    cg_residual: list = field(default_factory=list)
    rel_change: list = field(default_factory=list)

    def to_csv(self) -> str:
        buf = io.StringIO()
        buf.write("iteration,energy,grad_norm,cg_residual,rel_change\n")
        for i in range(len(self.energy)):
            buf.write(f"{i},{self.energy[i]:.12g},{self.grad_norm[i]:.12g},"
                      f"{self.cg_residual[i]:.12g},{self.rel_change[i]:.12g}\n")
        return buf.getvalue()


def red_energy(y, x, op: deg.DegradationOperator, d: Denoiser,
               sigma: float, lam: float) -> float:
    """Scalar energy: data misfit plus denoiser-induced Laplacian term."""
    y = np.asarray(y, dtype=np.float64)
    x = np.asarray(x, dtype=np.float64)
    resid = deg.apply(op, x) - y
    xv = vectorize(x)
    reg = float(xv @ (xv - vectorize(denoise(d, x, sigma))))
    return 0.5 * float(np.vdot(resid, resid).real) + 0.5 * lam * reg


def red_gradient(y, x, op: deg.DegradationOperator, d: Denoiser,
                 sigma: float, lam: float) -> np.ndarray:
    """Flattened gradient H^T(Hx - y) + lam (x - h(x))."""
    y = np.asarray(y, dtype=np.float64)
    x = np.asarray(x, dtype=np.float64)
    data = deg.adjoint(op, deg.apply(op, x) - y, x.shape[:2])
    return vectorize(data + lam * (x - denoise(d, x, sigma)))


def red_solve(y, op: deg.DegradationOperator, d: Denoiser,
              cfg: RedConfig):
    """Run the fixed-point iteration; returns (image, RedTrace)."""
    y = np.asarray(y, dtype=np.float64)
    if y.ndim == 2:
        y = y[:, :, None]
    s = op.scale
    hr_w, hr_h = y.shape[1] * s, y.shape[0] * s
    if cfg.init == "bicubic":
        x = bicubic_resize(y, hr_w, hr_h)
    else:
        x = np.zeros((hr_h, hr_w, y.shape[2]))
    trace = RedTrace()
    sigmas = cfg.schedule.sigmas()
    for k in range(cfg.outer_iters):
        sigma = float(sigmas[k])
        z = denoise(d, x, sigma)
        res = deg.solve_regularized(op, y, z, cfg.lam,
                                    cg_tol=cfg.cg_tol,
                                    cg_max_iter=cfg.cg_max_iter)
        x_new = res.x
        if not np.isfinite(x_new).all():
            raise RedError(f"non-finite iterate at outer iteration {k}")
        denom = max(float(np.linalg.norm(x)), 1e-300)
        change = float(np.linalg.norm(x_new - x)) / denom
        trace.energy.append(red_energy(y, x_new, op, d, sigma, cfg.lam))
        trace.grad_norm.append(
            float(np.linalg.norm(red_gradient(y, x_new, op, d, sigma, cfg.lam))))
        trace.cg_residual.append(res.rel_residual)
        trace.rel_change.append(change)
        x = x_new
        if cfg.stop_tol > 0 and change < cfg.stop_tol:
            break
    return x, trace
