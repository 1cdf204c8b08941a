"""PSNR / SSIM scoring and aggregate reports with survival curves.

PSNR is computed on the 8-bit scale over all channels; SSIM is the
standard single-scale index (11x11 Gaussian window, sigma 1.5) on luma,
averaged over valid window positions only.
"""

from __future__ import annotations

import csv
import io
import json
import math
from dataclasses import dataclass, field

import numpy as np
from scipy.signal import fftconvolve

from .image import to_luma

_SURVIVAL_POINTS = 64


class MetricError(ValueError):
    pass


def psnr(a: np.ndarray, b: np.ndarray) -> float:
    """Peak signal-to-noise ratio in dB; +inf for identical images."""
    a = np.asarray(a, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    if a.shape != b.shape:
        raise MetricError(f"shape mismatch {a.shape} vs {b.shape}")
    mse = float(np.mean((255.0 * (a - b)) ** 2))
    if mse == 0.0:
        return math.inf
    return 10.0 * math.log10(255.0 ** 2 / mse)


def _ssim_window(size: int = 11, sigma: float = 1.5) -> np.ndarray:
    t = np.arange(size, dtype=np.float64) - (size - 1) / 2
    g = np.exp(-0.5 * (t / sigma) ** 2)
    k = np.outer(g, g)
    return k / k.sum()


def ssim(a: np.ndarray, b: np.ndarray) -> float:
    """Mean structural similarity on luma, valid windows only."""
    a = np.asarray(a, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    if a.shape != b.shape:
        raise MetricError(f"shape mismatch {a.shape} vs {b.shape}")
    x = 255.0 * to_luma(a)[:, :, 0]
    y = 255.0 * to_luma(b)[:, :, 0]
    win = _ssim_window()
    if x.shape[0] < win.shape[0] or x.shape[1] < win.shape[1]:
        raise MetricError("image smaller than SSIM window")
    c1 = (0.01 * 255.0) ** 2
    c2 = (0.03 * 255.0) ** 2

    def f(img):
        return fftconvolve(img, win, mode="valid")

    mu_x, mu_y = f(x), f(y)
    var_x = f(x * x) - mu_x ** 2
    var_y = f(y * y) - mu_y ** 2
    cov = f(x * y) - mu_x * mu_y
    num = (2 * mu_x * mu_y + c1) * (2 * cov + c2)
    den = (mu_x ** 2 + mu_y ** 2 + c1) * (var_x + var_y + c2)
    return float(np.mean(num / den))


@dataclass
class ScoreReport:
    names: list
    psnr_db: list
    ssim_val: list
    mean_psnr: float       # over finite entries only
    psnr_inf_count: int
    mean_ssim: float
    psnr_curve: list = field(default_factory=list)  # (threshold, fraction)
    ssim_curve: list = field(default_factory=list)
    notes: dict = field(default_factory=dict)

    def to_json(self) -> str:
        return json.dumps({
            "per_image": [
                {"name": n, "psnr_db": None if math.isinf(p) else p, "ssim": s}
                for n, p, s in zip(self.names, self.psnr_db, self.ssim_val)
            ],
            "mean_psnr_db": self.mean_psnr,
            "psnr_inf_count": self.psnr_inf_count,
            "mean_ssim": self.mean_ssim,
            "notes": self.notes,
        }, indent=2, sort_keys=True)

    def to_csv(self) -> str:
        buf = io.StringIO()
        wr = csv.writer(buf, lineterminator="\n")
        wr.writerow(["name", "psnr_db", "ssim"])
        for n, p, s in zip(self.names, self.psnr_db, self.ssim_val):
            wr.writerow([n, "inf" if math.isinf(p) else f"{p:.6f}", f"{s:.6f}"])
        wr.writerow(["mean", f"{self.mean_psnr:.6f}", f"{self.mean_ssim:.6f}"])
        return buf.getvalue()

    def curves_csv(self, which: str = "psnr") -> str:
        curve = self.psnr_curve if which == "psnr" else self.ssim_curve
        buf = io.StringIO()
        buf.write("threshold,fraction\n")
        for t, fr in curve:
            buf.write(f"{t:.6f},{fr:.6f}\n")
        return buf.getvalue()


def _survival(scores, lo=None, hi=None):
    finite = [s for s in scores if math.isfinite(s)]
    if not finite:
        return []
    lo = min(finite) if lo is None else lo
    hi = max(finite) if hi is None else hi
    if hi <= lo:
        hi = lo + 1.0
    thresholds = np.linspace(lo, hi, _SURVIVAL_POINTS)
    n = len(scores)
    return [(float(t), sum(s > t for s in scores) / n) for t in thresholds]


def score_set(pairs, names=None) -> ScoreReport:
    """Score (output, ground-truth) pairs and build the aggregate report.

    Infinite PSNR entries are excluded from the mean and counted in
    psnr_inf_count instead.
    """
    pairs = list(pairs)
    if not pairs:
        raise MetricError("empty pair list")
    if names is None:
        names = [f"image_{i:04d}" for i in range(len(pairs))]
    if len(names) != len(pairs):
        raise MetricError("names/pairs length mismatch")
    ps = [psnr(a, b) for a, b in pairs]
    ss = [ssim(a, b) for a, b in pairs]
    finite = [p for p in ps if math.isfinite(p)]
    mean_psnr = float(np.mean(finite)) if finite else math.inf
    report = ScoreReport(
        names=list(names), psnr_db=ps, ssim_val=ss,
        mean_psnr=mean_psnr, psnr_inf_count=len(ps) - len(finite),
        mean_ssim=float(np.mean(ss)),
        psnr_curve=_survival(ps), ssim_curve=_survival(ss),
        notes={"psnr": "all channels, 8-bit scale", "ssim": "luma only"},
    )
    return report
