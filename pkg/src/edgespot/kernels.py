"""Dense float32 tensor kernels: convolution, normalization, activations.

Tensors are C-contiguous ``numpy.float32`` arrays laid out channel-major:
``(channels, frequency, time)`` for 2-D feature maps and ``(channels, time)``
for 1-D sequences.  All kernels are pure functions over immutable inputs and
hold no state, so they are safe to call from any number of threads.

Padding per spatial axis is one of:

* ``"same"``  - output extent is ``ceil(in / stride)``; total padding is the
  minimum achieving that, split ``left = ceil(total/2)``.  For an even kernel
  of size k at stride 1 this places taps at offsets ``-k/2 .. k/2 - 1``.
* ``"valid"`` - no padding.
* ``(left, right)`` - explicit pad counts.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional, Union

import numpy as np

from .errors import ParameterError, ShapeError

Pad = Union[str, tuple]


def as_f32(x) -> np.ndarray:
    """Coerce to a C-contiguous float32 array."""
    return np.ascontiguousarray(x, dtype=np.float32)


@dataclass(frozen=True)
class ConvSpec:
    """Geometry of a 1-D or 2-D convolution.

    ``kernel``/``stride``/``dilation``/``padding`` have one entry per spatial
    axis: ``(freq, time)`` for 2-D, ``(time,)`` for 1-D.  ``groups == 1`` is a
    regular convolution; ``groups == in_channels`` is depthwise.
    """

    in_channels: int
    out_channels: int
    kernel: tuple
    stride: tuple = ()
    dilation: tuple = ()
    groups: int = 1
    padding: tuple = ()
    bias: bool = False

    def __post_init__(self):
        nd = len(self.kernel)
        if nd not in (1, 2):
            raise ParameterError(f"conv kernel must be 1-D or 2-D, got {self.kernel}")
        object.__setattr__(self, "stride", tuple(self.stride) or (1,) * nd)
        object.__setattr__(self, "dilation", tuple(self.dilation) or (1,) * nd)
        object.__setattr__(self, "padding", tuple(self.padding) or ("same",) * nd)
        for name in ("stride", "dilation", "padding"):
            if len(getattr(self, name)) != nd:
                raise ParameterError(f"{name} rank does not match kernel rank {nd}")
        if any(k < 1 for k in self.kernel):
            raise ParameterError(f"kernel extents must be >= 1, got {self.kernel}")
        if any(s < 1 for s in self.stride):
            raise ParameterError(f"stride must be >= 1, got {self.stride}")
        if any(d < 1 for d in self.dilation):
            raise ParameterError(f"dilation must be >= 1, got {self.dilation}")
        if self.groups < 1:
            raise ParameterError(f"groups must be >= 1, got {self.groups}")
        if self.in_channels % self.groups or self.out_channels % self.groups:
            raise ParameterError(
                f"channels ({self.in_channels} -> {self.out_channels}) must be "
                f"divisible by groups={self.groups}"
            )

    @property
    def weight_shape(self) -> tuple:
        return (self.out_channels, self.in_channels // self.groups) + self.kernel


def _resolve_pad(extent: int, kernel: int, stride: int, dilation: int, pad: Pad):
    """Return (left, right) padding for one spatial axis."""
    span = dilation * (kernel - 1)
    if pad == "same":
        out = -(-extent // stride)  # ceil
        total = max((out - 1) * stride + span + 1 - extent, 0)
        left = (total + 1) // 2
        return left, total - left
    if pad == "valid":
        return 0, 0
    left, right = pad
    if left < 0 or right < 0:
        raise ParameterError(f"explicit padding must be >= 0, got {pad}")
    return left, right


def conv_out_extent(extent: int, kernel: int, stride: int, dilation: int, pad: Pad) -> int:
    """Output extent of one spatial axis under the standard conv arithmetic."""
    left, right = _resolve_pad(extent, kernel, stride, dilation, pad)
    padded = extent + left + right
    span = dilation * (kernel - 1)
    if padded < span + 1:
        raise ShapeError("spatial", f">= {span + 1 - left - right}", extent, "convolution")
    return (padded - span - 1) // stride + 1


def _conv(x: np.ndarray, spec: ConvSpec, weights: np.ndarray,
          bias: Optional[np.ndarray]) -> np.ndarray:
    """Shared N-D convolution core (cross-correlation, no kernel flip)."""
    nd = len(spec.kernel)
    if x.ndim != nd + 1:
        raise ShapeError("rank", nd + 1, x.ndim, "conv input")
    if x.shape[0] != spec.in_channels:
        raise ShapeError("in_channels", spec.in_channels, x.shape[0], "conv input")
    weights = as_f32(weights)
    if weights.shape != spec.weight_shape:
        raise ShapeError("weights", spec.weight_shape, weights.shape, "conv weights")
    if spec.bias:
        if bias is None:
            raise ShapeError("bias", (spec.out_channels,), None, "conv bias")
        bias = as_f32(bias)
        if bias.shape != (spec.out_channels,):
            raise ShapeError("bias", (spec.out_channels,), bias.shape, "conv bias")
    elif bias is not None:
        raise ParameterError("bias supplied but spec.bias is False")

    x = as_f32(x)
    pads = [
        _resolve_pad(x.shape[1 + a], spec.kernel[a], spec.stride[a],
                     spec.dilation[a], spec.padding[a])
        for a in range(nd)
    ]
    xp = np.pad(x, [(0, 0)] + [list(p) for p in pads])
    out_sp = tuple(
        conv_out_extent(x.shape[1 + a], spec.kernel[a], spec.stride[a],
                        spec.dilation[a], spec.padding[a])
        for a in range(nd)
    )

    g = spec.groups
    cig = spec.in_channels // g
    cog = spec.out_channels // g
    xg = xp.reshape((g, cig) + xp.shape[1:])
    wg = weights.reshape((g, cog, cig) + spec.kernel)
    flat = int(np.prod(out_sp))
    acc = np.zeros((g, cog, flat), dtype=np.float32)

    # Accumulate one kernel tap at a time; each tap is a strided slice of the
    # padded input contracted against a (cog, cig) weight plane per group.
    for taps in np.ndindex(*spec.kernel):
        sl = tuple(
            slice(taps[a] * spec.dilation[a],
                  taps[a] * spec.dilation[a] + (out_sp[a] - 1) * spec.stride[a] + 1,
                  spec.stride[a])
            for a in range(nd)
        )
        window = xg[(slice(None), slice(None)) + sl].reshape(g, cig, flat)
        acc += wg[(slice(None), slice(None), slice(None)) + taps] @ window

    out = acc.reshape((spec.out_channels,) + out_sp)
    if spec.bias:
        out = out + bias.reshape((-1,) + (1,) * nd)
    return np.ascontiguousarray(out)


def conv2d(x: np.ndarray, spec: ConvSpec, weights: np.ndarray,
           bias: Optional[np.ndarray] = None) -> np.ndarray:
    """2-D convolution over a (C, F, T) tensor."""
    if len(spec.kernel) != 2:
        raise ParameterError("conv2d requires a 2-D kernel spec")
    return _conv(x, spec, weights, bias)


def conv1d(x: np.ndarray, spec: ConvSpec, weights: np.ndarray,
           bias: Optional[np.ndarray] = None) -> np.ndarray:
    """1-D convolution over a (C, T) tensor."""
    if len(spec.kernel) != 1:
        raise ParameterError("conv1d requires a 1-D kernel spec")
    return _conv(x, spec, weights, bias)


@dataclass(frozen=True)
class NormParams:
    """Inference-mode (sub-spectral) batch-norm statistics.

    With ``subbands == 1`` this is plain per-channel batch norm; with
    ``subbands == S > 1`` the frequency axis is split into S contiguous bands
    and each (channel, band) pair gets its own statistics.  Parameter vectors
    are laid out channel-major: index ``c * S + b``.
    """

    gamma: np.ndarray
    beta: np.ndarray
    mean: np.ndarray
    var: np.ndarray
    eps: float = 1e-5
    subbands: int = 1

    def __post_init__(self):
        for name in ("gamma", "beta", "mean", "var"):
            object.__setattr__(self, name, as_f32(getattr(self, name)).ravel())
        n = self.gamma.shape[0]
        for name in ("beta", "mean", "var"):
            if getattr(self, name).shape[0] != n:
                raise ShapeError(name, n, getattr(self, name).shape[0], "norm params")
        if self.subbands < 1:
            raise ParameterError(f"subbands must be >= 1, got {self.subbands}")
        if n % self.subbands:
            raise ParameterError(
                f"parameter count {n} not divisible by subbands={self.subbands}"
            )
        if np.any(self.var < 0):
            raise ParameterError("variance entries must be >= 0")

    @property
    def channels(self) -> int:
        return self.gamma.shape[0] // self.subbands


def normalize(x: np.ndarray, params: NormParams) -> np.ndarray:
    """Apply ``y = gamma * (x - mean) / sqrt(var + eps) + beta``.

    Accepts (C, F, T) maps (plain or sub-spectral) and (C, T) sequences
    (plain only).
    """
    x = as_f32(x)
    c, s = params.channels, params.subbands
    if x.shape[0] != c:
        raise ShapeError("channels", c, x.shape[0], "normalize")
    scale = (params.gamma / np.sqrt(params.var + np.float32(params.eps))).astype(np.float32)
    shift = (params.beta - params.mean * scale).astype(np.float32)
    if x.ndim == 2:
        if s != 1:
            raise ParameterError("sub-spectral norm needs a frequency axis")
        return x * scale[:, None] + shift[:, None]
    if x.ndim != 3:
        raise ShapeError("rank", "2 or 3", x.ndim, "normalize")
    f = x.shape[1]
    if f % s:
        raise ParameterError(f"subbands={s} does not divide frequency extent {f}")
    xs = x.reshape(c, s, f // s, x.shape[2])
    y = xs * scale.reshape(c, s, 1, 1) + shift.reshape(c, s, 1, 1)
    return np.ascontiguousarray(y.reshape(x.shape))


def identity_norm(channels: int, subbands: int = 1, eps: float = 0.0) -> NormParams:
    """NormParams that leave the input unchanged (gamma=1, rest zero/unit)."""
    n = channels * subbands
    return NormParams(np.ones(n), np.zeros(n), np.zeros(n), np.ones(n),
                      eps=eps, subbands=subbands)


def activate(x: np.ndarray, kind: str, slope=None) -> np.ndarray:
    """Elementwise activation: ``relu``, ``swish`` or ``prelu``.

    ``prelu`` takes a scalar slope or a per-channel vector broadcast over the
    trailing axes.
    """
    x = as_f32(x)
    if kind == "relu":
        return np.maximum(x, np.float32(0))
    if kind == "swish":
        return (x / (1.0 + np.exp(-x.astype(np.float64)))).astype(np.float32)
    if kind == "prelu":
        if slope is None:
            raise ParameterError("prelu requires a slope")
        a = as_f32(slope)
        if a.size > 1:
            a = a.reshape((-1,) + (1,) * (x.ndim - 1))
        return np.where(x >= 0, x, a * x)
    raise ParameterError(f"unknown activation kind '{kind}'")
