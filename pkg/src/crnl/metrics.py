"""Recovery quality metrics: PSNR, SSIM, NRMSE, R^2."""

from __future__ import annotations

import json
from dataclasses import dataclass, asdict

import numpy as np
from scipy.ndimage import correlate

__all__ = ["psnr", "nrmse", "r_square", "ssim", "MetricReport"]


def _as_bands(x: np.ndarray) -> np.ndarray:
    x = np.asarray(x, dtype=np.float64)
    if x.ndim == 2:
        return x[:, :, None]
    if x.ndim == 3:
        return x
    raise ValueError(f"expected a 2- or 3-way image tensor, got {x.ndim} modes")


def psnr(x: np.ndarray, ref: np.ndarray, peak: float = 1.0) -> float:
    """Peak signal-to-noise ratio in dB; multi-band inputs report the mean of
    per-band PSNRs. A band with zero MSE contributes +inf."""
    x, ref = np.asarray(x, np.float64), np.asarray(ref, np.float64)
    if x.shape != ref.shape:
        raise ValueError(f"shape mismatch {x.shape} vs {ref.shape}")
    xb, rb = _as_bands(x), _as_bands(ref)
    vals = []
    for b in range(xb.shape[2]):
        mse = float(np.mean(np.square(xb[:, :, b] - rb[:, :, b])))
        vals.append(np.inf if mse == 0.0 else 10.0 * np.log10(peak * peak / mse))
    return float(np.mean(vals))


def nrmse(x: np.ndarray, ref: np.ndarray) -> float:
    """||x - ref||_F / ||ref||_F."""
    x, ref = np.asarray(x, np.float64), np.asarray(ref, np.float64)
    if x.shape != ref.shape:
        raise ValueError(f"shape mismatch {x.shape} vs {ref.shape}")
    denom = float(np.sqrt(np.sum(np.square(ref))))
    if denom == 0.0:
        raise ValueError("reference is identically zero")
    return float(np.sqrt(np.sum(np.square(x - ref))) / denom)


def r_square(pred: np.ndarray, truth: np.ndarray) -> float:
    """Coefficient of determination 1 - SS_res / SS_tot."""
    pred, truth = np.ravel(np.asarray(pred, np.float64)), np.ravel(np.asarray(truth, np.float64))
    if pred.shape != truth.shape:
        raise ValueError(f"shape mismatch {pred.shape} vs {truth.shape}")
    ss_tot = float(np.sum(np.square(truth - truth.mean())))
    if ss_tot == 0.0:
        raise ValueError("truth is constant, R^2 undefined")
    ss_res = float(np.sum(np.square(truth - pred)))
    return 1.0 - ss_res / ss_tot


def _gaussian_kernel(size: int = 11, sigma: float = 1.5) -> np.ndarray:
    r = np.arange(size, dtype=np.float64) - (size - 1) / 2.0
    k = np.exp(-0.5 * (r / sigma) ** 2)
    k2 = np.outer(k, k)
    return k2 / k2.sum()


def ssim(x: np.ndarray, ref: np.ndarray, peak: float = 1.0) -> float:
    """Mean SSIM with an 11x11 Gaussian window (sigma 1.5), C1=(0.01*peak)^2,
    C2=(0.03*peak)^2, averaged over valid window positions; multi-band inputs
    report the per-band mean."""
    xb, rb = _as_bands(np.asarray(x)), _as_bands(np.asarray(ref))
    if xb.shape != rb.shape:
        raise ValueError(f"shape mismatch {xb.shape} vs {rb.shape}")
    size = 11
    if xb.shape[0] < size or xb.shape[1] < size:
        raise ValueError(f"image smaller than the {size}x{size} SSIM window")
    w = _gaussian_kernel(size, 1.5)
    c1 = (0.01 * peak) ** 2
    c2 = (0.03 * peak) ** 2
    half = size // 2
    vals = []
    for b in range(xb.shape[2]):
        a, r = xb[:, :, b], rb[:, :, b]
        # correlate then crop: interior values equal true windowed sums
        def win(img):
            return correlate(img, w, mode="constant")[half:-half, half:-half]
        mu_a, mu_r = win(a), win(r)
        var_a = win(a * a) - mu_a * mu_a
        var_r = win(r * r) - mu_r * mu_r
        cov = win(a * r) - mu_a * mu_r
        num = (2 * mu_a * mu_r + c1) * (2 * cov + c2)
        den = (mu_a**2 + mu_r**2 + c1) * (var_a + var_r + c2)
        vals.append(float(np.mean(num / den)))
    return float(np.mean(vals))


@dataclass
class MetricReport:
    """Bag of metrics, JSON-serializable. Fields that do not apply to a task
    stay None and serialize as null."""

    psnr: float | None = None
    ssim: float | None = None
    nrmse: float | None = None
    r_square: float | None = None

    def to_dict(self) -> dict:
        return asdict(self)

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), sort_keys=True)
