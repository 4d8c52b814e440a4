"""Core raster containers shared by every stage of the toolkit.

All pixel data is held as float64 C-contiguous numpy arrays and frozen
(read-only) after construction, so instances are safe to share across
threads. Operations elsewhere never mutate a raster in place.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np


def _frozen_f64(values, name: str) -> np.ndarray:
    arr = np.ascontiguousarray(values, dtype=np.float64)
    if not np.all(np.isfinite(arr)):
        raise ValueError(f"{name}: data contains non-finite values")
    arr.setflags(write=False)
    return arr


@dataclass(frozen=True, eq=False)
class Image:
    """H x W x C intensity raster with every sample in [0, 1].

    A 2-D array is accepted and treated as single-channel. Channel count
    must be 1 or 3. Values outside [0, 1] are rejected, not clamped:
    clamping is the compositors' responsibility.
    """

    data: np.ndarray

    def __post_init__(self):
        arr = np.asarray(self.data)
        if arr.ndim == 2:
            arr = arr[:, :, np.newaxis]
        if arr.ndim != 3:
            raise ValueError(f"Image: expected 2-D or 3-D data, got ndim={arr.ndim}")
        h, w, c = arr.shape
        if h < 1 or w < 1:
            raise ValueError(f"Image: dimensions must be positive, got {h}x{w}")
        if c not in (1, 3):
            raise ValueError(f"Image: channel count must be 1 or 3, got {c}")
        arr = _frozen_f64(arr, "Image")
        if arr.min() < 0.0 or arr.max() > 1.0:
            raise ValueError("Image: values must lie in [0, 1]")
        object.__setattr__(self, "data", arr)

    @property
    def height(self) -> int:
        return self.data.shape[0]

    @property
    def width(self) -> int:
        return self.data.shape[1]

    @property
    def channels(self) -> int:
        return self.data.shape[2]


@dataclass(frozen=True, eq=False)
class DepthMap:
    """H x W scene depth in dataset-defined units (non-negative, finite).

    ``unit_scale`` records metres per depth unit and is metadata only;
    the attenuation/scattering coefficients absorb the units.
    """

    data: np.ndarray
    unit_scale: float = 1.0

    def __post_init__(self):
        arr = np.asarray(self.data)
        if arr.ndim != 2:
            raise ValueError(f"DepthMap: expected 2-D data, got ndim={arr.ndim}")
        if arr.shape[0] < 1 or arr.shape[1] < 1:
            raise ValueError(f"DepthMap: dimensions must be positive, got {arr.shape}")
        arr = _frozen_f64(arr, "DepthMap")
        if arr.min() < 0.0:
            raise ValueError("DepthMap: negative depth")
        if not (self.unit_scale > 0):
            raise ValueError("DepthMap: unit_scale must be positive")
        object.__setattr__(self, "data", arr)

    @property
    def height(self) -> int:
        return self.data.shape[0]

    @property
    def width(self) -> int:
        return self.data.shape[1]


@dataclass(frozen=True, eq=False)
class TransmissionMap:
    """H x W pointwise transmission factor in [0, 1].

    exp(-k*d) is strictly positive for finite inputs, but the zero limit
    is representable so float underflow at extreme depth, and the
    full-opacity limit used in tests, remain constructible.
    """

    data: np.ndarray

    def __post_init__(self):
        arr = np.asarray(self.data)
        if arr.ndim != 2:
            raise ValueError(f"TransmissionMap: expected 2-D data, got ndim={arr.ndim}")
        if arr.shape[0] < 1 or arr.shape[1] < 1:
            raise ValueError(f"TransmissionMap: dimensions must be positive, got {arr.shape}")
        arr = _frozen_f64(arr, "TransmissionMap")
        if arr.min() < 0.0 or arr.max() > 1.0:
            raise ValueError("TransmissionMap: values must lie in [0, 1]")
        object.__setattr__(self, "data", arr)

    @property
    def height(self) -> int:
        return self.data.shape[0]

    @property
    def width(self) -> int:
        return self.data.shape[1]


@dataclass(frozen=True, eq=False)
class Tensor4:
    """N x C x H x W feature tensor (NCHW layout, finite float64)."""

    data: np.ndarray

    def __post_init__(self):
        arr = np.asarray(self.data)
        if arr.ndim != 4:
            raise ValueError(f"Tensor4: expected 4-D data, got ndim={arr.ndim}")
        if min(arr.shape) < 1:
            raise ValueError(f"Tensor4: all dims must be positive, got {arr.shape}")
        object.__setattr__(self, "data", _frozen_f64(arr, "Tensor4"))

    @property
    def dims(self) -> tuple[int, int, int, int]:
        return self.data.shape


def avgpool2(arr: np.ndarray) -> np.ndarray:
    """Non-overlapping 2x2 average pooling of a 2-D or 3-D array.

    A trailing odd row/column is dropped before pooling.
    """
    h2, w2 = arr.shape[0] // 2, arr.shape[1] // 2
    if h2 < 1 or w2 < 1:
        raise ValueError("avgpool2: input smaller than 2x2")
    trimmed = arr[: 2 * h2, : 2 * w2]
    if arr.ndim == 2:
        return trimmed.reshape(h2, 2, w2, 2).mean(axis=(1, 3))
    return trimmed.reshape(h2, 2, w2, 2, arr.shape[2]).mean(axis=(1, 3))


def downsample2x(img: Image) -> Image:
    """Halve an image by 2x2 average pooling (odd trailing row/col dropped)."""
    return Image(avgpool2(img.data))


def require_same_hw(a, b, what: str) -> None:
    """Raise ValueError unless the two rasters share height and width."""
    if (a.height, a.width) != (b.height, b.width):
        raise ValueError(
            f"{what}: dimension mismatch {a.height}x{a.width} vs {b.height}x{b.width}"
        )
