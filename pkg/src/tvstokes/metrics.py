"""Image quality measures: PSNR, global MSSIM and the tangent-field score."""
from __future__ import annotations

import csv
import io
import math
from dataclasses import dataclass

import numpy as np

from .grid import ShapeError

K1, K2 = 0.01, 0.03
PEAK = 1.0
C1 = (K1 * PEAK) ** 2
C2 = (K2 * PEAK) ** 2
MSSIM_WEIGHT = 20.0


def _pair(d, gt):
    d = np.asarray(d, dtype=float)
    gt = np.asarray(gt, dtype=float)
    if d.shape != gt.shape:
        raise ShapeError(f"shape mismatch {d.shape} vs {gt.shape}")
    return d, gt


def mse(d, gt) -> float:
    d, gt = _pair(d, gt)
    return float(np.mean((d - gt) ** 2))


def psnr(d, gt) -> float:
    """Peak signal-to-noise ratio in dB for intensities in [0, 1]; ``inf`` when equal."""
    err = mse(d, gt)
    if err == 0.0:
        return math.inf
    return -10.0 * math.log10(err)


def mssim(d, gt) -> float:
    """Structural similarity from whole-image statistics (population moments)."""
    d, gt = _pair(d, gt)
    mu_d, mu_g = d.mean(), gt.mean()
    var_d = np.mean((d - mu_d) ** 2)
    var_g = np.mean((gt - mu_g) ** 2)
    cov = np.mean((d - mu_d) * (gt - mu_g))
    num = (2 * mu_d * mu_g + C1) * (2 * cov + C2)
    den = (mu_d**2 + mu_g**2 + C1) * (var_d + var_g + C2)
    return float(num / den)


def perf_tau(tau, tau_gt) -> float:
    """Sum over both components of ``PSNR/2 + 20 * MSSIM/2``; ``inf`` on an exact match."""
    tau, tau_gt = _pair(tau, tau_gt)
    if tau.shape[0] != 2:
        raise ShapeError("perf_tau expects vector fields of shape (2, n2, n1)")
    return sum(0.5 * psnr(tau[i], tau_gt[i]) + MSSIM_WEIGHT * 0.5 * mssim(tau[i], tau_gt[i])
               for i in range(2))


def best_index(scores) -> int:
    """Argmax treating ``inf`` as the largest value; the first one wins ties."""
    scores = list(scores)
    if not scores:
        raise ValueError("no scores to choose from")
    return max(range(len(scores)), key=lambda i: (scores[i], -i))


@dataclass(frozen=True)
class MetricReport:
    psnr: float
    mssim: float
    perf: float | None = None

    @property
    def exact(self) -> bool:
        """True when the PSNR hit the zero-error sentinel."""
        return math.isinf(self.psnr)

    @classmethod
    def of(cls, d, gt) -> "MetricReport":
        return cls(psnr(d, gt), mssim(d, gt))


CSV_HEADER = ["image_id", "noise_variance", "method", "params", "psnr", "mssim"]


def format_params(params: dict) -> str:
    return ";".join(f"{k}={v!r}" for k, v in sorted(params.items()))


def metrics_rows_csv(rows, fh=None) -> str:
    """Serialize ``(image_id, variance, method, params, psnr, mssim)`` tuples."""
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(CSV_HEADER)
    for image_id, var, method, params, p, s in rows:
        if isinstance(params, dict):
            params = format_params(params)
        w.writerow([image_id, repr(float(var)), method, params, repr(float(p)), repr(float(s))])
    text = buf.getvalue()
    if fh is not None:
        if hasattr(fh, "write"):
            fh.write(text)
        else:
            with open(fh, "w", encoding="utf-8", newline="") as out:
                out.write(text)
    return text
