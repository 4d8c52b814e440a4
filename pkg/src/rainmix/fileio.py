"""Bit-exact image and depth-map file I/O.

PNG (8/16-bit, grayscale or RGB) is handled through OpenCV; PFM is parsed
directly. Integer PNG samples map to [0, 1] by v / (2^bits - 1) on load and
are quantized back with round-half-up on save, so a save/load round trip of
already-quantized data is the identity. sRGB values are treated as linear
intensities; there is no colour management.
"""

from __future__ import annotations

import os

import cv2
import numpy as np

from .raster import DepthMap, Image


class ImageIOError(Exception):
    """A raster file could not be read or written."""


def load_image(path) -> Image:
    """Load an 8- or 16-bit PNG (1 or 3 channels) as an Image in [0, 1].

    Integer samples are mapped to [0, 1] by v / (2^bits - 1). 3-channel
    data is returned in RGB order.
    """
    path = os.fspath(path)
    if not os.path.isfile(path):
        raise ImageIOError(f"{path}: file not found")
    raw = cv2.imread(path, cv2.IMREAD_UNCHANGED)
    if raw is None:
        raise ImageIOError(f"{path}: unreadable or corrupt image stream")
    if raw.dtype == np.uint8:
        scale = 255.0
    elif raw.dtype == np.uint16:
        scale = 65535.0
    else:
        raise ImageIOError(f"{path}: unsupported sample type {raw.dtype}")
    if raw.ndim == 2:
        data = raw.astype(np.float64)[:, :, np.newaxis]
    elif raw.ndim == 3 and raw.shape[2] == 3:
        data = cv2.cvtColor(raw, cv2.COLOR_BGR2RGB).astype(np.float64)
    else:
        channels = raw.shape[2] if raw.ndim == 3 else raw.ndim
        raise ImageIOError(f"{path}: unsupported channel count {channels}")
    return Image(data / scale)


def save_image(img: Image, path, bits: int = 8) -> None:
    """Write an Image as an 8- or 16-bit PNG.

    Quantization is round-half-up of v * (2^bits - 1), so exact k/(2^bits-1)
    values are stored losslessly.
    """
    if bits not in (8, 16):
        raise ValueError(f"save_image: bits must be 8 or 16, got {bits}")
    path = os.fspath(path)
    maxv = float(2**bits - 1)
    q = np.floor(img.data * maxv + 0.5)
    q = q.astype(np.uint8 if bits == 8 else np.uint16)
    if img.channels == 1:
        out = q[:, :, 0]
    else:
        out = cv2.cvtColor(q, cv2.COLOR_RGB2BGR)
    try:
        ok = cv2.imwrite(path, out)
    except cv2.error as exc:
        raise ImageIOError(f"{path}: write failed ({exc})") from exc
    if not ok:
        raise ImageIOError(f"{path}: write failed (unwritable path?)")


def read_pfm(path) -> np.ndarray:
    """Read a single-channel PFM file as an H x W float array.

    Handles both endiannesses (sign of the scale token) and the PFM
    bottom-to-top scanline order. Colour ('PF') files are rejected.
    """
    path = os.fspath(path)
    if not os.path.isfile(path):
        raise ImageIOError(f"{path}: file not found")
    with open(path, "rb") as fh:
        blob = fh.read()

    def next_token(pos: int) -> tuple[bytes, int]:
        while pos < len(blob) and blob[pos] in b" \t\r\n":
            pos += 1
        start = pos
        while pos < len(blob) and blob[pos] not in b" \t\r\n":
            pos += 1
        return blob[start:pos], pos

    magic, pos = next_token(0)
    if magic == b"PF":
        raise ImageIOError(f"{path}: colour PFM is not supported for depth")
    if magic != b"Pf":
        raise ImageIOError(f"{path}: not a PFM file (magic {magic!r})")
    try:
        wtok, pos = next_token(pos)
        htok, pos = next_token(pos)
        stok, pos = next_token(pos)
        width, height, scale = int(wtok), int(htok), float(stok)
    except ValueError:
        raise ImageIOError(f"{path}: malformed PFM header") from None
    if width < 1 or height < 1:
        raise ImageIOError(f"{path}: zero-sized PFM raster {width}x{height}")
    # exactly one whitespace byte separates the scale token from the raster;
    # the raster itself may begin with whitespace-valued bytes
    raster = blob[pos + 1:]
    count = width * height
    if len(raster) < 4 * count:
        raise ImageIOError(f"{path}: PFM raster truncated")
    dtype = "<f4" if scale < 0 else ">f4"
    data = np.frombuffer(raster[: 4 * count], dtype=dtype).reshape(height, width)
    return data[::-1].astype(np.float64)  # stored bottom-to-top


def write_pfm(path, data: np.ndarray) -> None:
    """Write an H x W float array as a little-endian PFM file."""
    arr = np.asarray(data, dtype=np.float64)
    if arr.ndim != 2:
        raise ValueError("write_pfm: expected 2-D data")
    header = f"Pf\n{arr.shape[1]} {arr.shape[0]}\n-1.0\n".encode("ascii")
    try:
        with open(os.fspath(path), "wb") as fh:
            fh.write(header)
            fh.write(arr[::-1].astype("<f4").tobytes())
    except OSError as exc:
        raise ImageIOError(f"{path}: write failed ({exc})") from exc


def load_depth(path, convention: str = "pfm", scale: float | None = None,
               unit_scale: float = 1.0) -> DepthMap:
    """Load a depth map from a PFM file or a 16-bit grayscale PNG.

    convention='pfm' reads the float samples verbatim; convention='png16'
    maps integer samples to depth by v * scale, where ``scale`` (depth
    units per integer step) is required and positive. Negative or
    non-finite depth is rejected.
    """
    path = os.fspath(path)
    if convention == "pfm":
        data = read_pfm(path)
    elif convention == "png16":
        if scale is None or not (scale > 0):
            raise ValueError("load_depth: png16 requires a positive scale")
        if not os.path.isfile(path):
            raise ImageIOError(f"{path}: file not found")
        raw = cv2.imread(path, cv2.IMREAD_UNCHANGED)
        if raw is None:
            raise ImageIOError(f"{path}: unreadable or corrupt image stream")
        if raw.ndim != 2 or raw.dtype != np.uint16:
            raise ImageIOError(f"{path}: expected single-channel 16-bit PNG depth")
        data = raw.astype(np.float64) * scale
    else:
        raise ValueError(f"load_depth: unknown convention {convention!r}")
    if not np.all(np.isfinite(data)):
        raise ImageIOError(f"{path}: non-finite depth values")
    if data.min() < 0:
        raise ImageIOError(f"{path}: negative depth")
    return DepthMap(data, unit_scale=unit_scale)
