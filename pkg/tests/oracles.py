"""Independent brute-force oracles used by the test suite.

These deliberately avoid the library's separable-filter / vectorized code
paths: windowed statistics come from explicit per-window weighted sums,
and the min-filter / gradient oracles are double loops.
"""

import numpy as np


def luminance(img) -> np.ndarray:
    a = img.data
    if a.shape[2] == 1:
        return a[:, :, 0]
    return 0.299 * a[:, :, 0] + 0.587 * a[:, :, 1] + 0.114 * a[:, :, 2]


def naive_ssim_gray(x: np.ndarray, y: np.ndarray, window=11, sigma=1.5,
                    c1=0.0001, c2=0.0009) -> float:
    half = window // 2
    ax = np.arange(-half, half + 1, dtype=np.float64)
    g1 = np.exp(-(ax * ax) / (2.0 * sigma * sigma))
    g1 /= g1.sum()
    g2 = np.outer(g1, g1)
    h, w = x.shape
    values = []
    for i in range(half, h - half):
        for j in range(half, w - half):
            wx = x[i - half:i + half + 1, j - half:j + half + 1]
            wy = y[i - half:i + half + 1, j - half:j + half + 1]
            mx, my = (g2 * wx).sum(), (g2 * wy).sum()
            vx = (g2 * wx * wx).sum() - mx * mx
            vy = (g2 * wy * wy).sum() - my * my
            cxy = (g2 * wx * wy).sum() - mx * my
            values.append(((2 * mx * my + c1) * (2 * cxy + c2))
                          / ((mx * mx + my * my + c1) * (vx + vy + c2)))
    return float(np.mean(values))


def naive_ssim(x, y, **kw) -> float:
    return naive_ssim_gray(luminance(x), luminance(y), **kw)


def mean_pool2(a: np.ndarray) -> np.ndarray:
    h2, w2 = a.shape[0] // 2, a.shape[1] // 2
    out = np.empty((h2, w2))
    for i in range(h2):
        for j in range(w2):
            out[i, j] = a[2 * i:2 * i + 2, 2 * j:2 * j + 2].mean()
    return out


def naive_dark_channel(img, patch: int) -> np.ndarray:
    half = patch // 2
    cmin = img.data.min(axis=2)
    h, w = cmin.shape
    out = np.empty_like(cmin)
    for i in range(h):
        for j in range(w):
            out[i, j] = cmin[max(0, i - half):min(h, i + half + 1),
                             max(0, j - half):min(w, j + half + 1)].min()
    return out


def naive_tv(img, anisotropic=False) -> float:
    # per-element magnitudes via explicit loops; the mean reduction is the
    # same np.mean as the implementation so the comparison can be bit-exact
    a = img.data
    h, w, c = a.shape
    mags = np.empty((h, w, c))
    for i in range(h):
        for j in range(w):
            for k in range(c):
                gh = a[i, j + 1, k] - a[i, j, k] if j + 1 < w else 0.0
                gv = a[i + 1, j, k] - a[i, j, k] if i + 1 < h else 0.0
                mags[i, j, k] = (abs(gh) + abs(gv)) if anisotropic else abs(gh + gv)
    return float(np.mean(mags))


def naive_bin_stats(depth: np.ndarray, values: np.ndarray, bins: int):
    """Mean of `values` per equal-width depth bin, by explicit partition."""
    dmin, dmax = depth.min(), depth.max()
    sums = np.zeros(bins)
    counts = np.zeros(bins, dtype=int)
    h, w = depth.shape
    for i in range(h):
        for j in range(w):
            if dmax == dmin:
                b = 0
            else:
                b = min(int((depth[i, j] - dmin) / (dmax - dmin) * bins), bins - 1)
            sums[b] += values[i, j]
            counts[b] += 1
    with np.errstate(invalid="ignore"):
        return sums / counts, counts
