"""Forward passes of the hybrid normalization block and its pieces.

The block is: 3x3 convolution -> split channels in half -> batch-norm the
first half (learnable affine), instance-norm the second half -> concat ->
SELU. Everything here is inference math on plain tensors: statistics are
computed from the input batch (population variance, no running averages)
and nothing is trained.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .raster import Tensor4

# Self-normalizing activation constants (standard values).
SELU_SCALE = 1.0507009873554805
SELU_ALPHA = 1.6732632423543772


@dataclass(frozen=True)
class SeluConstants:
    lambda_selu: float = SELU_SCALE
    alpha_selu: float = SELU_ALPHA


@dataclass(frozen=True, eq=False)
class AffineParams:
    """Per-channel scale (gamma) and shift (beta) of a normalization layer."""

    gamma: np.ndarray
    beta: np.ndarray

    def __post_init__(self):
        g = np.ascontiguousarray(self.gamma, dtype=np.float64).reshape(-1)
        b = np.ascontiguousarray(self.beta, dtype=np.float64).reshape(-1)
        if g.shape != b.shape:
            raise ValueError("AffineParams: gamma and beta must have equal length")
        if not (np.all(np.isfinite(g)) and np.all(np.isfinite(b))):
            raise ValueError("AffineParams: parameters must be finite")
        g.setflags(write=False)
        b.setflags(write=False)
        object.__setattr__(self, "gamma", g)
        object.__setattr__(self, "beta", b)

    @classmethod
    def identity(cls, channels: int) -> "AffineParams":
        return cls(np.ones(channels), np.zeros(channels))

    @property
    def channels(self) -> int:
        return self.gamma.size


def conv3x3(x: Tensor4, kernel: np.ndarray) -> Tensor4:
    """3x3 cross-correlation, stride 1, zero padding 1.

    kernel has shape (C_out, C_in, 3, 3); output is (N, C_out, H, W).
    """
    k = np.ascontiguousarray(kernel, dtype=np.float64)
    if k.ndim != 4 or k.shape[2:] != (3, 3):
        raise ValueError(f"conv3x3: kernel must be (C_out, C_in, 3, 3), got {k.shape}")
    n, c, h, w = x.dims
    if k.shape[1] != c:
        raise ValueError(f"conv3x3: kernel expects {k.shape[1]} input channels, tensor has {c}")
    padded = np.pad(x.data, ((0, 0), (0, 0), (1, 1), (1, 1)))
    windows = np.lib.stride_tricks.sliding_window_view(padded, (3, 3), axis=(2, 3))
    out = np.einsum("nchwij,ocij->nohw", windows, k, optimize=True)
    return Tensor4(out)


def batch_norm(x: Tensor4, a: AffineParams, eps: float = 1e-5) -> Tensor4:
    """Normalize each channel over (N, H, W) with population variance,
    then apply the learnable affine."""
    if a.channels != x.dims[1]:
        raise ValueError(f"batch_norm: {a.channels} affine channels for a "
                         f"{x.dims[1]}-channel tensor")
    mean = x.data.mean(axis=(0, 2, 3), keepdims=True)
    var = x.data.var(axis=(0, 2, 3), keepdims=True)
    normed = (x.data - mean) / np.sqrt(var + eps)
    gamma = a.gamma.reshape(1, -1, 1, 1)
    beta = a.beta.reshape(1, -1, 1, 1)
    return Tensor4(gamma * normed + beta)


def instance_norm(x: Tensor4, eps: float = 1e-5) -> Tensor4:
    """Normalize each (instance, channel) plane over (H, W); no affine."""
    mean = x.data.mean(axis=(2, 3), keepdims=True)
    var = x.data.var(axis=(2, 3), keepdims=True)
    return Tensor4((x.data - mean) / np.sqrt(var + eps))


def selu(x: Tensor4, consts: SeluConstants = SeluConstants()) -> Tensor4:
    """Pointwise scale*x for x > 0, scale*alpha*(e^x - 1) otherwise."""
    a = x.data
    out = np.where(a > 0, consts.lambda_selu * a,
                   consts.lambda_selu * consts.alpha_selu * np.expm1(a))
    return Tensor4(out)


def hnb_normalize(x_mid: Tensor4, a: AffineParams,
                  eps: float = 1e-5) -> tuple[Tensor4, Tensor4]:
    """Split channels: batch-norm the first half, instance-norm the second,
    concatenate in order, then activate.

    Returns (pre_activation, selu(pre_activation)).
    """
    c = x_mid.dims[1]
    if c % 2 != 0:
        raise ValueError("channel count must be even for HNB split")
    half = c // 2
    bn_half = batch_norm(Tensor4(x_mid.data[:, :half]), a, eps)
    in_half = instance_norm(Tensor4(x_mid.data[:, half:]), eps)
    pre = Tensor4(np.concatenate([bn_half.data, in_half.data], axis=1))
    return pre, selu(pre)


def hnb_block(x_in: Tensor4, kernel: np.ndarray, a: AffineParams,
              eps: float = 1e-5) -> Tensor4:
    """Full block: conv3x3 -> hybrid normalization -> SELU."""
    _, out = hnb_normalize(conv3x3(x_in, kernel), a, eps)
    return out
