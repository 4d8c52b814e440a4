"""Reference image-quality metrics and loss arithmetic.

All kernels are pure float64 functions of their inputs. SSIM statistics
use an 11x11 Gaussian window (sigma 1.5), population variance, and valid
(unpadded) windows; the stability constants default to C1 = 0.0001 and
C2 = 0.0009. RGB inputs are reduced to luminance with ITU-R BT.601
weights before windowed statistics.

The multi-scale similarity evaluates both the luminance and the
contrast-structure factor at every scale with unit exponents by default,
so a single scale reduces exactly to plain SSIM; scales are linked by
2x2 average pooling.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.ndimage import correlate1d, minimum_filter

from .raster import DepthMap, Image, avgpool2, require_same_hw

PSNR_CAP_DB = 99.0

_LUMA_WEIGHTS = (0.299, 0.587, 0.114)  # ITU-R BT.601


@dataclass(frozen=True)
class SsimParams:
    """Windowed-similarity parameters.

    luminance_exp / contrast_exp are per-scale exponents; None means all
    ones (one entry per scale).
    """

    c1: float = 0.0001
    c2: float = 0.0009
    window: int = 11
    window_sigma: float = 1.5
    scales: int = 5
    luminance_exp: tuple[float, ...] | None = None
    contrast_exp: tuple[float, ...] | None = None

    def __post_init__(self):
        if not (self.c1 > 0 and self.c2 > 0):
            raise ValueError("SsimParams: c1 and c2 must be positive")
        if self.window < 3 or self.window % 2 == 0:
            raise ValueError("SsimParams: window must be odd and >= 3")
        if self.scales < 1:
            raise ValueError("SsimParams: scales must be >= 1")
        lum = self.luminance_exp if self.luminance_exp is not None else (1.0,) * self.scales
        con = self.contrast_exp if self.contrast_exp is not None else (1.0,) * self.scales
        lum, con = tuple(float(v) for v in lum), tuple(float(v) for v in con)
        if len(lum) != self.scales or len(con) != self.scales:
            raise ValueError("SsimParams: exponent arrays must have one entry per scale")
        object.__setattr__(self, "luminance_exp", lum)
        object.__setattr__(self, "contrast_exp", con)


@dataclass(frozen=True)
class LossWeights:
    """Weights of the training objective's terms.

    adv_weight scales the adversarial term, dc_weight the dark-channel
    term, tv_weight the total-variation term; rec_alpha blends the
    multi-scale similarity loss against plain L1 inside the
    reconstruction loss.
    """

    adv_weight: float = 0.1
    dc_weight: float = 0.01
    tv_weight: float = 0.01
    rec_alpha: float = 0.1

    def __post_init__(self):
        for name in ("adv_weight", "dc_weight", "tv_weight", "rec_alpha"):
            v = getattr(self, name)
            if not (np.isfinite(v) and v >= 0):
                raise ValueError(f"LossWeights: {name} must be finite and >= 0")


@dataclass
class MetricsRecord:
    """Metric values for one predicted/reference image pair."""

    psnr_db: float
    ssim: float
    ms_ssim: float
    l1: float
    dc_loss: float
    tv_loss: float
    rec_loss: float | None = None

    METRIC_KEYS = ("psnr_db", "ssim", "ms_ssim", "l1", "dc_loss", "tv_loss")

    def to_dict(self) -> dict:
        out = {key: getattr(self, key) for key in self.METRIC_KEYS}
        if self.rec_loss is not None:
            out["rec_loss"] = self.rec_loss
        return out


# --- elementwise metrics ----------------------------------------------------

def _paired(x: Image, y: Image, what: str) -> tuple[np.ndarray, np.ndarray]:
    require_same_hw(x, y, what)
    if x.channels != y.channels:
        raise ValueError(f"{what}: channel mismatch {x.channels} vs {y.channels}")
    return x.data, y.data


def mse(x: Image, y: Image) -> float:
    """Mean squared difference over all H*W*C samples."""
    a, b = _paired(x, y, "mse")
    return float(np.mean((a - b) ** 2))


def psnr(x: Image, y: Image) -> float:
    """Peak signal-to-noise ratio in dB for unit-range data.

    A zero-error pair returns the documented 99.0 dB cap so downstream
    records stay finite.
    """
    err = mse(x, y)
    if err == 0.0:
        return PSNR_CAP_DB
    return 10.0 * math.log10(1.0 / err)


def l1_image(x: Image, y: Image) -> float:
    """Mean absolute difference over all H*W*C samples."""
    a, b = _paired(x, y, "l1_image")
    return float(np.mean(np.abs(a - b)))


def depth_l1_loss(pred: DepthMap, gt: DepthMap) -> float:
    """Mean absolute depth error over the H*W grid."""
    require_same_hw(pred, gt, "depth_l1_loss")
    return float(np.mean(np.abs(pred.data - gt.data)))


# --- windowed similarity ----------------------------------------------------

def _luminance(img: Image) -> np.ndarray:
    if img.channels == 1:
        return img.data[:, :, 0]
    r, g, b = _LUMA_WEIGHTS
    return r * img.data[:, :, 0] + g * img.data[:, :, 1] + b * img.data[:, :, 2]


def gaussian_window(window: int, sigma: float) -> np.ndarray:
    """Normalized 1-D Gaussian tap vector of odd length."""
    half = window // 2
    x = np.arange(-half, half + 1, dtype=np.float64)
    k = np.exp(-(x * x) / (2.0 * sigma * sigma))
    return k / k.sum()


def _window_mean(arr: np.ndarray, taps: np.ndarray) -> np.ndarray:
    # separable valid-region correlation: filter both axes, crop the
    # padding-contaminated border
    half = taps.size // 2
    out = correlate1d(arr, taps, axis=0, mode="constant")
    out = correlate1d(out, taps, axis=1, mode="constant")
    return out[half:arr.shape[0] - half, half:arr.shape[1] - half]


def _similarity_maps(x: np.ndarray, y: np.ndarray, p: SsimParams):
    """Per-window luminance and contrast-structure maps over valid windows."""
    if min(x.shape) < p.window:
        raise ValueError(
            f"ssim: image {x.shape} smaller than the {p.window}x{p.window} window")
    taps = gaussian_window(p.window, p.window_sigma)
    mu_x = _window_mean(x, taps)
    mu_y = _window_mean(y, taps)
    # population (biased) variance of the Gaussian-weighted window
    var_x = _window_mean(x * x, taps) - mu_x * mu_x
    var_y = _window_mean(y * y, taps) - mu_y * mu_y
    cov = _window_mean(x * y, taps) - mu_x * mu_y
    lum = (2.0 * mu_x * mu_y + p.c1) / (mu_x * mu_x + mu_y * mu_y + p.c1)
    cs = (2.0 * cov + p.c2) / (var_x + var_y + p.c2)
    return lum, cs


def ssim(x: Image, y: Image, p: SsimParams | None = None) -> float:
    """Single-scale structural similarity (mean over valid windows)."""
    p = p or SsimParams()
    _paired(x, y, "ssim")
    lum, cs = _similarity_maps(_luminance(x), _luminance(y), p)
    return float(np.mean(lum * cs))


def ms_ssim(x: Image, y: Image, p: SsimParams | None = None) -> float:
    """Multi-scale structural similarity.

    Scale factors are the window means of lum^luminance_exp *
    cs^contrast_exp at each scale (both factors at every scale); the
    result is their product. With one scale and unit exponents this is
    exactly ``ssim``. The loss form is 1 - ms_ssim.
    """
    p = p or SsimParams()
    _paired(x, y, "ms_ssim")
    need = p.window * 2 ** (p.scales - 1)
    if min(x.height, x.width) < need:
        raise ValueError(
            f"ms_ssim: {x.height}x{x.width} image cannot support {p.scales} scales "
            f"with window {p.window} (needs min dim >= {need})")
    a, b = _luminance(x), _luminance(y)
    product = 1.0
    for scale in range(p.scales):
        if scale > 0:
            a, b = avgpool2(a), avgpool2(b)
        lum, cs = _similarity_maps(a, b, p)
        be, ge = p.luminance_exp[scale], p.contrast_exp[scale]
        factor = lum * cs if (be == 1.0 and ge == 1.0) else \
            np.sign(lum) * np.abs(lum) ** be * np.sign(cs) * np.abs(cs) ** ge
        product *= float(np.mean(factor))
    return product


# --- dark channel -----------------------------------------------------------

def dark_channel(img: Image, patch: int = 15) -> np.ndarray:
    """Pointwise channel minimum followed by a patch x patch sliding
    minimum with edge-replicate boundary. Returns an H x W map."""
    if patch < 1 or patch % 2 == 0:
        raise ValueError(f"dark_channel: patch must be odd and >= 1, got {patch}")
    if patch > min(img.height, img.width):
        raise ValueError("dark_channel: patch larger than image")
    channel_min = img.data.min(axis=2)
    return minimum_filter(channel_min, size=patch, mode="nearest")


def dc_loss(img: Image, patch: int = 15) -> float:
    """Mean of the dark channel (its L1 norm over the pixel count)."""
    return float(np.mean(dark_channel(img, patch)))


# --- total variation --------------------------------------------------------

def tv_loss(img: Image, anisotropic: bool = False) -> float:
    """Total-variation loss from forward differences, mean-normalized.

    The default takes the L1 norm of the elementwise *sum* of the
    horizontal and vertical gradient images. ``anisotropic=True``
    switches to the conventional |grad_h| + |grad_v| form instead; both
    put zeros on the trailing boundary and divide by H*W*C.
    """
    a = img.data
    grad_h = np.zeros_like(a)
    grad_v = np.zeros_like(a)
    grad_h[:, :-1, :] = a[:, 1:, :] - a[:, :-1, :]
    grad_v[:-1, :, :] = a[1:, :, :] - a[:-1, :, :]
    if anisotropic:
        return float(np.mean(np.abs(grad_h) + np.abs(grad_v)))
    return float(np.mean(np.abs(grad_h + grad_v)))


# --- adversarial score arithmetic -------------------------------------------

def _scores(batch, what: str) -> np.ndarray:
    arr = np.asarray(batch, dtype=np.float64).reshape(-1)
    if arr.size == 0:
        raise ValueError(f"{what}: empty score batch")
    if not np.all(np.isfinite(arr)):
        raise ValueError(f"{what}: non-finite scores")
    return arr


def lsgan_g_loss(fake_scores) -> float:
    """Least-squares generator loss: mean of (s - 1)^2."""
    s = _scores(fake_scores, "lsgan_g_loss")
    return float(np.mean((s - 1.0) ** 2))


def lsgan_d_loss(real_scores, fake_scores) -> float:
    """Least-squares discriminator loss: mean (r-1)^2 + mean f^2."""
    r = _scores(real_scores, "lsgan_d_loss")
    f = _scores(fake_scores, "lsgan_d_loss")
    return float(np.mean((r - 1.0) ** 2) + np.mean(f**2))


# --- combined objectives ----------------------------------------------------

def rec_loss(pred: Image, target: Image, w: LossWeights | None = None,
             p: SsimParams | None = None) -> float:
    """Reconstruction loss: rec_alpha * (1 - ms_ssim) + (1 - rec_alpha) * L1."""
    w = w or LossWeights()
    ms = ms_ssim(pred, target, p)
    return w.rec_alpha * (1.0 - ms) + (1.0 - w.rec_alpha) * l1_image(pred, target)


def total_loss(depth_l1: float, adv_g: float, rec: float, dc: float,
               tv: float, w: LossWeights | None = None) -> float:
    """Weighted sum of the objective terms:
    depth_l1 + adv_weight*adv_g + rec + dc_weight*dc + tv_weight*tv."""
    w = w or LossWeights()
    parts = (depth_l1, adv_g, rec, dc, tv)
    if not all(np.isfinite(v) for v in parts):
        raise ValueError("total_loss: all components must be finite")
    return depth_l1 + w.adv_weight * adv_g + rec + w.dc_weight * dc + w.tv_weight * tv
