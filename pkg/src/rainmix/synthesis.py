"""Depth-guided rain degradation model: pattern rendering and compositors.

The degraded image is built from three effects, each with its own physical
layer: additive rain streaks attenuated by depth, adherent raindrops that
occlude the scene, and distance-accumulated haze. The combined compositor
blends all three, using an ambient-light colour for both the drop
appearance and the veiling term.

Rendering is deterministic: every random quantity is drawn from a
counter-based Philox stream keyed by the caller's seed, in a documented
order, so identical (dims, params, seed) yield bit-identical rasters.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .raster import DepthMap, Image, TransmissionMap, require_same_hw
from .recipes import DropParams, RainRecipe, StreakParams


def _rng(seed: int) -> np.random.Generator:
    # Philox is counter-based and splittable; keying it directly keeps the
    # stream stable across platforms and numpy versions.
    return np.random.Generator(np.random.Philox(key=seed))


def _count_per_megapixel(density: float, w: int, h: int) -> int:
    return int(math.ceil(density * w * h / 1e6))


@dataclass(frozen=True, eq=False)
class DropField:
    """Raindrop ground truth: binary mask ``m`` and thickness layer ``d``.

    At generation time m(x) = 1 exactly where d(x) exceeds the recipe's
    mask threshold.
    """

    m: np.ndarray
    d: np.ndarray

    def __post_init__(self):
        m = np.ascontiguousarray(self.m, dtype=np.float64)
        d = np.ascontiguousarray(self.d, dtype=np.float64)
        if m.ndim != 2 or d.shape != m.shape:
            raise ValueError("DropField: m and d must be 2-D with equal shape")
        if not np.all((m == 0.0) | (m == 1.0)):
            raise ValueError("DropField: mask must be binary")
        if not np.all(np.isfinite(d)) or d.min() < 0.0 or d.max() > 1.0:
            raise ValueError("DropField: thickness must lie in [0, 1]")
        m.setflags(write=False)
        d.setflags(write=False)
        object.__setattr__(self, "m", m)
        object.__setattr__(self, "d", d)

    @property
    def height(self) -> int:
        return self.m.shape[0]

    @property
    def width(self) -> int:
        return self.m.shape[1]


@dataclass(frozen=True, eq=False)
class MorSample:
    """One synthesized sample with its full ground-truth bundle."""

    mor: Image
    clean: Image
    depth: DepthMap
    s_pattern: Image
    t_r: TransmissionMap
    t: TransmissionMap
    drops: DropField
    recipe: RainRecipe

    def __post_init__(self):
        for name in ("clean", "depth", "s_pattern", "t_r", "t", "drops"):
            require_same_hw(self.mor, getattr(self, name), f"MorSample.{name}")

    def recompose(self) -> Image:
        """Re-run the combined compositor from the stored layers."""
        return compose_mor(self.clean, self.s_pattern, self.t_r, self.drops,
                           self.t, self.recipe.haze.ambient_light)


# --- rain streaks -----------------------------------------------------------

def sample_streaks(w: int, h: int, p: StreakParams, seed: int) -> np.ndarray:
    """Draw streak parameters: one row (cx, cy, angle_deg, length, width,
    intensity) per streak.

    Draw order (fixed, part of the determinism contract): centers x, then
    centers y, angles, lengths, widths, intensities, each as one vector.
    """
    n = _count_per_megapixel(p.density, w, h)
    rng = _rng(seed)
    cx = rng.uniform(0.0, w, n)
    cy = rng.uniform(0.0, h, n)
    angle = p.angle_mean + rng.normal(0.0, p.angle_jitter, n)
    length = rng.uniform(p.length_range[0], p.length_range[1], n)
    width = rng.uniform(p.width_range[0], p.width_range[1], n)
    intensity = rng.uniform(p.intensity_range[0], p.intensity_range[1], n)
    return np.column_stack([cx, cy, angle, length, width, intensity])


def rasterize_streaks(w: int, h: int, streaks: np.ndarray) -> np.ndarray:
    """Accumulate anti-aliased streak segments onto an H x W canvas.

    Each segment contributes intensity * coverage, where coverage falls
    off linearly from 1 inside the half-width to 0 one pixel outside it
    (distance taken from pixel centers at integer coordinates). The
    accumulated canvas is clamped to [0, 1].
    """
    canvas = np.zeros((h, w), dtype=np.float64)
    for cx, cy, angle_deg, length, width, intensity in streaks:
        theta = math.radians(angle_deg)
        ux, uy = math.sin(theta), math.cos(theta)  # 0 deg falls straight down
        hx, hy = 0.5 * length * ux, 0.5 * length * uy
        x0, y0, x1, y1 = cx - hx, cy - hy, cx + hx, cy + hy
        reach = 0.5 * width + 0.5
        jmin = max(0, int(math.floor(min(x0, x1) - reach)))
        jmax = min(w - 1, int(math.ceil(max(x0, x1) + reach)))
        imin = max(0, int(math.floor(min(y0, y1) - reach)))
        imax = min(h - 1, int(math.ceil(max(y0, y1) + reach)))
        if jmin > jmax or imin > imax:
            continue
        xs = np.arange(jmin, jmax + 1, dtype=np.float64)
        ys = np.arange(imin, imax + 1, dtype=np.float64)
        px, py = np.meshgrid(xs, ys)
        vx, vy = x1 - x0, y1 - y0
        seg_len2 = vx * vx + vy * vy
        if seg_len2 > 0.0:
            tproj = np.clip(((px - x0) * vx + (py - y0) * vy) / seg_len2, 0.0, 1.0)
        else:
            tproj = 0.0
        dx = px - (x0 + tproj * vx)
        dy = py - (y0 + tproj * vy)
        dist = np.sqrt(dx * dx + dy * dy)
        coverage = np.clip(reach - dist, 0.0, 1.0)
        canvas[imin:imax + 1, jmin:jmax + 1] += intensity * coverage
    return np.clip(canvas, 0.0, 1.0)


def render_streak_pattern(w: int, h: int, p: StreakParams, seed: int) -> Image:
    """Render the streak intensity pattern (single channel, values in [0, 1])."""
    if w < 1 or h < 1:
        raise ValueError("render_streak_pattern: zero-area canvas")
    return Image(rasterize_streaks(w, h, sample_streaks(w, h, p, seed)))


def streak_transmission(depth: DepthMap, attenuation: float) -> TransmissionMap:
    """Depth attenuation of streak visibility: exp(-attenuation * d)."""
    if attenuation < 0:
        raise ValueError("streak_transmission: attenuation must be >= 0")
    return TransmissionMap(np.exp(-attenuation * depth.data))


def compose_rain_streaks(clean: Image, s_pattern: Image,
                         t_r: TransmissionMap) -> Image:
    """Add the depth-attenuated streak layer to the clean image.

    The streak value is achromatic: the same amount is added to every
    channel, then the result is clamped to [0, 1].
    """
    require_same_hw(clean, s_pattern, "compose_rain_streaks")
    require_same_hw(clean, t_r, "compose_rain_streaks")
    if s_pattern.channels != 1:
        raise ValueError("compose_rain_streaks: s_pattern must be single-channel")
    layer = (s_pattern.data[:, :, 0] * t_r.data)[:, :, np.newaxis]
    return Image(np.clip(clean.data + layer, 0.0, 1.0))


# --- raindrops --------------------------------------------------------------

def sample_drops(w: int, h: int, p: DropParams, seed: int) -> np.ndarray:
    """Draw drop parameters: one row (cx, cy, radius) per drop.

    Draw order (fixed): centers x, centers y, then lognormal radii.
    """
    n = _count_per_megapixel(p.count_density, w, h)
    rng = _rng(seed)
    cx = rng.uniform(0.0, w, n)
    cy = rng.uniform(0.0, h, n)
    radius = np.exp(rng.normal(p.radius_log_mean, p.radius_log_sigma, n))
    return np.column_stack([cx, cy, radius])


def rasterize_drops(w: int, h: int, drops: np.ndarray, thickness_max: float,
                    mask_threshold: float) -> DropField:
    """Rasterize drops as radially smooth thickness bumps.

    A drop of radius R contributes thickness_max * cos^2(pi*r/(2R)) for
    r <= R; the layer is the per-pixel maximum over drops, and the mask
    marks pixels whose thickness exceeds the threshold.
    """
    if not (mask_threshold < thickness_max):
        raise ValueError("rasterize_drops: mask_threshold must be < thickness_max")
    d = np.zeros((h, w), dtype=np.float64)
    for cx, cy, radius in drops:
        if radius <= 0.0:
            continue
        jmin = max(0, int(math.floor(cx - radius)))
        jmax = min(w - 1, int(math.ceil(cx + radius)))
        imin = max(0, int(math.floor(cy - radius)))
        imax = min(h - 1, int(math.ceil(cy + radius)))
        if jmin > jmax or imin > imax:
            continue
        xs = np.arange(jmin, jmax + 1, dtype=np.float64)
        ys = np.arange(imin, imax + 1, dtype=np.float64)
        px, py = np.meshgrid(xs, ys)
        r = np.hypot(px - cx, py - cy)
        bump = np.where(r <= radius,
                        thickness_max * np.cos(np.pi * r / (2.0 * radius)) ** 2,
                        0.0)
        region = d[imin:imax + 1, jmin:jmax + 1]
        np.maximum(region, bump, out=region)
    np.clip(d, 0.0, 1.0, out=d)
    m = (d > mask_threshold).astype(np.float64)
    return DropField(m=m, d=d)


def render_raindrops(w: int, h: int, p: DropParams, seed: int) -> DropField:
    """Generate the raindrop mask and thickness layer for a canvas."""
    if w < 1 or h < 1:
        raise ValueError("render_raindrops: zero-area canvas")
    return rasterize_drops(w, h, sample_drops(w, h, p, seed),
                           p.thickness_max, p.mask_threshold)


def compose_raindrops(clean: Image, drops: DropField) -> Image:
    """Occlude the clean image with the drop layer.

    Masked pixels are replaced by the (achromatic) drop thickness; the
    result is clamped to [0, 1].
    """
    require_same_hw(clean, drops, "compose_raindrops")
    keep = (1.0 - drops.m)[:, :, np.newaxis]
    layer = drops.d[:, :, np.newaxis]
    return Image(np.clip(keep * clean.data + layer, 0.0, 1.0))


# --- haze -------------------------------------------------------------------

def haze_transmission(depth: DepthMap, scattering: float) -> TransmissionMap:
    """Atmospheric transmission: exp(-scattering * d)."""
    if scattering < 0:
        raise ValueError("haze_transmission: scattering must be >= 0")
    return TransmissionMap(np.exp(-scattering * depth.data))


def compose_haze(clean: Image, t: TransmissionMap, atmosphere_light) -> Image:
    """Standard scattering model: B*t + A*(1-t) per channel.

    With all inputs in [0, 1] the convex blend stays in range up to float
    rounding, so only a rounding guard is applied (no physics clamp).
    """
    require_same_hw(clean, t, "compose_haze")
    light = np.asarray(atmosphere_light, dtype=np.float64).reshape(-1)
    if light.size not in (1, clean.channels):
        raise ValueError("compose_haze: light must be scalar or per-channel")
    tt = t.data[:, :, np.newaxis]
    out = clean.data * tt + light * (1.0 - tt)
    assert out.min() >= -1e-12 and out.max() <= 1.0 + 1e-12
    return Image(np.clip(out, 0.0, 1.0))


# --- combined model ---------------------------------------------------------

def compose_mor(clean: Image, s_pattern: Image, t_r: TransmissionMap,
                drops: DropField, t: TransmissionMap, ambient_light) -> Image:
    """Blend streaks, raindrops and haze into the final degraded image.

    Per channel:
        ((1 - m) * (B + s * t_r) + ambient * d) * t + (1 - t) * ambient,
    clamped once to [0, 1]. The intermediate sum B + s * t_r may exceed 1;
    only the final result is clamped.
    """
    for other, name in ((s_pattern, "s_pattern"), (t_r, "t_r"),
                        (drops, "drops"), (t, "t")):
        require_same_hw(clean, other, f"compose_mor.{name}")
    if s_pattern.channels != 1:
        raise ValueError("compose_mor: s_pattern must be single-channel")
    ambient = np.asarray(ambient_light, dtype=np.float64).reshape(-1)
    if ambient.size not in (1, clean.channels):
        raise ValueError("compose_mor: ambient light must be scalar or per-channel")
    streak_layer = (s_pattern.data[:, :, 0] * t_r.data)[:, :, np.newaxis]
    keep = (1.0 - drops.m)[:, :, np.newaxis]
    inner = keep * (clean.data + streak_layer) + ambient * drops.d[:, :, np.newaxis]
    tt = t.data[:, :, np.newaxis]
    return Image(np.clip(inner * tt + (1.0 - tt) * ambient, 0.0, 1.0))
