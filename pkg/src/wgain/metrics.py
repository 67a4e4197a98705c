"""Image quality metrics on [0,1] float images: PSNR and SSIM.

SSIM follows the common convention for floating point images: uniform 7x7
window, sample (not population) covariance normalization, stabilizers
C1=(0.01)^2 and C2=(0.03)^2 for unit data range, and a border crop of half
the window on every side before averaging. Color images score each channel
independently and average.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.ndimage import uniform_filter

from .errors import ValidationError
from .masks import Mask, missing_fraction

SSIM_WINDOW = 7
SSIM_K1 = 0.01
SSIM_K2 = 0.03


def _check_pair(a: np.ndarray, b: np.ndarray) -> None:
    if a.shape != b.shape:
        raise ValidationError(f"image shapes differ: {a.shape} vs {b.shape}")
    if a.ndim not in (2, 3):
        raise ValidationError(f"expected 2-D or 3-D image arrays, got ndim={a.ndim}")
    if a.ndim == 3 and a.shape[2] != 3:
        raise ValidationError(f"3-D images must have 3 channels, got {a.shape[2]}")
    for arr in (a, b):
        if not np.all(np.isfinite(arr)):
            raise ValidationError("images must be finite")


def psnr(reference: np.ndarray, candidate: np.ndarray) -> float:
    """Peak signal-to-noise ratio in dB for unit data range.

    Identical inputs give math.inf; callers that aggregate must treat that
    case explicitly rather than averaging it away.
    """
    _check_pair(reference, candidate)
    diff = reference.astype(np.float64) - candidate.astype(np.float64)
    mse = float(np.mean(diff * diff))
    if mse == 0.0:
        return math.inf
    return 10.0 * math.log10(1.0 / mse)


def _ssim_single(a: np.ndarray, b: np.ndarray) -> float:
    win = SSIM_WINDOW
    if min(a.shape) < win:
        raise ValidationError(
            f"images must be at least {win}x{win} for SSIM, got {a.shape}"
        )
    c1 = SSIM_K1 ** 2
    c2 = SSIM_K2 ** 2
    npts = win ** 2
    # sample covariance correction over the window population
    cov_norm = npts / (npts - 1)

    filt = lambda arr: uniform_filter(arr, size=win)
    ua = filt(a)
    ub = filt(b)
    uaa = filt(a * a)
    ubb = filt(b * b)
    uab = filt(a * b)
    va = cov_norm * (uaa - ua * ua)
    vb = cov_norm * (ubb - ub * ub)
    vab = cov_norm * (uab - ua * ub)

    num = (2.0 * ua * ub + c1) * (2.0 * vab + c2)
    den = (ua * ua + ub * ub + c1) * (va + vb + c2)
    s = num / den

    pad = (win - 1) // 2
    return float(s[pad:-pad, pad:-pad].mean())


def ssim(reference: np.ndarray, candidate: np.ndarray) -> float:
    """Mean structural similarity; channels scored independently and averaged."""
    _check_pair(reference, candidate)
    a = reference.astype(np.float64)
    b = candidate.astype(np.float64)
    if a.ndim == 2:
        return _ssim_single(a, b)
    return float(np.mean([_ssim_single(a[:, :, c], b[:, :, c]) for c in range(3)]))


@dataclass(frozen=True)
class PairScore:
    psnr: float
    ssim: float
    missing_fraction: float


def evaluate_pair(truth: np.ndarray, inpainted: np.ndarray, mask: Mask) -> PairScore:
    """Full-frame metrics plus the fraction of pixels the mask removed."""
    if truth.shape[:2] != (mask.height, mask.width):
        raise ValidationError(
            f"mask {mask.height}x{mask.width} does not match image {truth.shape}"
        )
    return PairScore(
        psnr=psnr(truth, inpainted),
        ssim=ssim(truth, inpainted),
        missing_fraction=missing_fraction(mask),
    )
