"""Inference graphs: broadcast-residual blocks, positional encoding,
temporal self-attention, and the end-to-end embedding path.

Every layer consumes (C, F, T) or (C, T) float32 tensors from
:mod:`edgespot.kernels`.  The graph itself is data: :func:`edgespot.config.
build_plan` emits the ordered node list and this module interprets it, so the
executor, the footprint counter, and bundle validation can never disagree
about what the network contains.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Optional

import numpy as np

from .config import (
    EMBED_DIM,
    FREQ_KERNEL,
    HEAD_KERNEL,
    INPUT_SHAPE,
    Node,
    SSN_SUBBANDS,
    STEM_KERNEL,
    TEMPORAL_KERNEL,
    build_plan,
)
from .errors import BundleError, ParameterError, ShapeError
from .frontend import pcen
from .kernels import ConvSpec, NormParams, activate, as_f32, conv1d, conv2d, normalize


class _RecordView(dict):
    """Weight lookup that names the missing record instead of KeyError-ing."""

    def __missing__(self, key):
        raise BundleError(f"missing weight record '{key}'")


@dataclass(frozen=True)
class BlockParams:
    """Weights for one broadcast-residual block.

    ``temp_dw``/``temp_pw`` are set for standard blocks, ``temp_conv`` for
    fused ones; ``trans_*`` only for transition blocks (which also drop the
    identity shortcut).
    """

    freq_dw: np.ndarray
    ssn: NormParams
    temp_bn: NormParams
    stride: tuple = (1, 1)
    dilation: tuple = (1, 1)
    fused: bool = False
    transition: bool = False
    temp_conv: Optional[np.ndarray] = None
    temp_dw: Optional[np.ndarray] = None
    temp_pw: Optional[np.ndarray] = None
    temp_pw_bias: Optional[np.ndarray] = None
    trans_conv: Optional[np.ndarray] = None
    trans_bn: Optional[NormParams] = None

    def __post_init__(self):
        if self.fused:
            if self.temp_conv is None:
                raise ParameterError("fused block needs temp_conv")
            if self.temp_dw is not None or self.temp_pw is not None:
                raise ParameterError("fused block must not carry pointwise weights")
        else:
            if self.temp_dw is None or self.temp_pw is None or self.temp_pw_bias is None:
                raise ParameterError("standard block needs temp_dw, temp_pw, temp_pw_bias")
        if self.transition and (self.trans_conv is None or self.trans_bn is None):
            raise ParameterError("transition block needs trans_conv and trans_bn")

    @property
    def channels(self) -> int:
        return self.freq_dw.shape[0]


def _norm_from(records: dict, prefix: str, subbands: int = 1) -> NormParams:
    return NormParams(
        gamma=records[f"{prefix}.gamma"],
        beta=records[f"{prefix}.beta"],
        mean=records[f"{prefix}.mean"],
        var=records[f"{prefix}.var"],
        subbands=subbands,
    )


def block_params(node: Node, records: dict) -> BlockParams:
    """Assemble BlockParams for one plan node from a record mapping."""
    name = node.name
    kw = dict(
        freq_dw=records[f"{name}.freq.dw"],
        ssn=_norm_from(records, f"{name}.freq.ssn", subbands=SSN_SUBBANDS),
        temp_bn=_norm_from(records, f"{name}.temp.bn"),
        stride=node.stride,
        dilation=node.dilation,
        fused=node.fused,
        transition=node.transition,
    )
    if node.fused:
        kw["temp_conv"] = records[f"{name}.temp.conv"]
    else:
        kw["temp_dw"] = records[f"{name}.temp.dw"]
        kw["temp_pw"] = records[f"{name}.temp.pw"]
        kw["temp_pw_bias"] = records[f"{name}.temp.pw_bias"]
    if node.transition:
        kw["trans_conv"] = records[f"{name}.trans.conv"]
        kw["trans_bn"] = _norm_from(records, f"{name}.trans.bn")
    return BlockParams(**kw)


def bc_resblock(x: np.ndarray, p: BlockParams) -> np.ndarray:
    """One broadcast-residual block over a (C, F, T) map.

    The frequency branch is averaged over frequency, run through the temporal
    branch, broadcast back across frequency and summed with the 2-D residual.
    Transition blocks (channel or stride change) first project channels with a
    1x1 conv and keep no identity shortcut.
    """
    if x.ndim != 3:
        raise ShapeError("rank", 3, x.ndim, "bc_resblock input")
    cout = p.channels
    if p.transition:
        tspec = ConvSpec(x.shape[0], cout, (1, 1))
        x = activate(normalize(conv2d(x, tspec, p.trans_conv), p.trans_bn), "relu")

    fspec = ConvSpec(cout, cout, (FREQ_KERNEL, 1), stride=p.stride,
                     dilation=(1, 1), groups=cout)
    f2 = normalize(conv2d(x, fspec, p.freq_dw), p.ssn)

    pooled = f2.mean(axis=1)  # (C, T)
    if p.fused:
        cspec = ConvSpec(cout, cout, (TEMPORAL_KERNEL,), dilation=(p.dilation[1],))
        t = activate(normalize(conv1d(pooled, cspec, p.temp_conv), p.temp_bn), "swish")
    else:
        dspec = ConvSpec(cout, cout, (TEMPORAL_KERNEL,), dilation=(p.dilation[1],),
                         groups=cout)
        t = activate(normalize(conv1d(pooled, dspec, p.temp_dw), p.temp_bn), "swish")
        pwspec = ConvSpec(cout, cout, (1,), bias=True)
        t = conv1d(t, pwspec, p.temp_pw, p.temp_pw_bias)

    y = f2 + t[:, None, :]
    if not p.transition:
        y = y + x
    return activate(y, "relu")


@dataclass(frozen=True)
class RpeParams:
    """Per-channel temporal filters of the positional-encoding residual."""

    filters: np.ndarray  # (C, 1, kernel)
    bias: np.ndarray     # (C,)

    def __post_init__(self):
        object.__setattr__(self, "filters", as_f32(self.filters))
        object.__setattr__(self, "bias", as_f32(self.bias))
        if self.filters.ndim != 3 or self.filters.shape[1] != 1:
            raise ShapeError("filters", "(C, 1, k)", self.filters.shape, "rpe")
        if self.bias.shape != (self.filters.shape[0],):
            raise ShapeError("bias", (self.filters.shape[0],), self.bias.shape, "rpe")


def rpe(x: np.ndarray, p: RpeParams) -> np.ndarray:
    """Residual positional encoding: x + depthwise temporal conv of x.

    The even kernel is aligned to taps at offsets -k/2 .. k/2 - 1 so the
    output length equals the input length; out-of-range samples read as zero.
    """
    c, k = p.filters.shape[0], p.filters.shape[2]
    if x.ndim != 2 or x.shape[0] != c:
        raise ShapeError("channels", c, x.shape, "rpe input")
    left = k // 2
    spec = ConvSpec(c, c, (k,), groups=c, padding=((left, k - 1 - left),), bias=True)
    return as_f32(x) + conv1d(x, spec, p.filters, p.bias)


@dataclass(frozen=True)
class AttentionParams:
    """Projections and output slope for temporal self-attention.

    All three projections map the channel width C to a fixed ``dim`` so the
    embedding width does not grow with the backbone.
    """

    w_q: np.ndarray
    w_k: np.ndarray
    w_v: np.ndarray
    b_q: np.ndarray
    b_k: np.ndarray
    b_v: np.ndarray
    prelu: np.ndarray

    def __post_init__(self):
        for name in ("w_q", "w_k", "w_v", "b_q", "b_k", "b_v", "prelu"):
            object.__setattr__(self, name, as_f32(getattr(self, name)))
        c, d = self.w_q.shape
        for name in ("w_k", "w_v"):
            if getattr(self, name).shape != (c, d):
                raise ShapeError(name, (c, d), getattr(self, name).shape, "attention")
        for name in ("b_q", "b_k", "b_v"):
            if getattr(self, name).shape != (d,):
                raise ShapeError(name, (d,), getattr(self, name).shape, "attention")

    @property
    def dim(self) -> int:
        return self.w_q.shape[1]


def _attend(x: np.ndarray, p: AttentionParams):
    x = as_f32(x)
    if x.ndim != 2 or x.shape[1] != p.w_q.shape[0]:
        raise ShapeError("features", p.w_q.shape[0], x.shape, "attention input")
    q = x @ p.w_q + p.b_q
    k = x @ p.w_k + p.b_k
    v = x @ p.w_v + p.b_v
    logits = (q @ k.T) / np.float32(math.sqrt(p.dim))
    if not np.all(np.isfinite(logits)):
        raise ParameterError("attention logits are not finite")
    # Stable row softmax in float64, cast back once.
    z = logits.astype(np.float64)
    z -= z.max(axis=1, keepdims=True)
    ez = np.exp(z)
    a = (ez / ez.sum(axis=1, keepdims=True)).astype(np.float32)
    return a @ v, a


def sdpa(x: np.ndarray, p: AttentionParams) -> np.ndarray:
    """Scaled dot-product self-attention over time on a (T, C) input.

    Returns PReLU(softmax(QK^T / sqrt(d)) V) with shape (T, dim).
    """
    out, _ = _attend(x, p)
    return activate(out, "prelu", slope=p.prelu)


def attention_map(x: np.ndarray, p: AttentionParams) -> np.ndarray:
    """The row-stochastic attention matrix A for diagnostics and tests."""
    _, a = _attend(x, p)
    return a


def _check_features(features: np.ndarray) -> np.ndarray:
    features = as_f32(features)
    if features.shape != INPUT_SHAPE[1:]:
        raise ShapeError("features", INPUT_SHAPE[1:], features.shape, "embed input")
    if not np.all(np.isfinite(features)):
        raise ParameterError("feature map contains non-finite values")
    return features


def embed(features: np.ndarray, bundle, trace: Optional[list] = None) -> np.ndarray:
    """Run the full graph on a (40, 101) feature map; returns a 64-vector.

    ``trace``, if given, receives one ``(name, in_shape, out_shape)`` tuple
    per executed node.
    """
    rec = _RecordView(bundle.records)
    x = _check_features(features)[None]  # (1, 40, 101)

    for node in build_plan(bundle.config):
        shape_in = x.shape
        if node.kind == "pcen":
            x = pcen(x[0], bundle.pcen)[None]
        elif node.kind == "stem":
            spec = ConvSpec(1, node.cout, STEM_KERNEL, stride=node.stride)
            x = conv2d(x, spec, rec["stem.conv"])
            x = activate(normalize(x, _norm_from(rec, "stem.bn")), "relu")
        elif node.kind == "block":
            x = bc_resblock(x, block_params(node, rec))
        elif node.kind == "head_dw":
            spec = ConvSpec(node.cin, node.cin, HEAD_KERNEL, groups=node.cin,
                            padding=("valid", "same"), bias=True)
            x = conv2d(x, spec, rec["head.dw"], rec["head.dw_bias"])
        elif node.kind == "head_pw":
            spec = ConvSpec(node.cin, node.cout, (1, 1))
            x = conv2d(x, spec, rec["head.pw"])
            x = activate(normalize(x, _norm_from(rec, "head.bn")), "relu")
        elif node.kind == "rpe":
            x = x[:, 0, :]  # frequency fully collapsed by the head
            shape_in = x.shape
            x = rpe(x, RpeParams(rec["rpe.filters"], rec["rpe.bias"]))
        elif node.kind == "attention":
            x = x.T  # time-major for attention
            shape_in = x.shape
            p = AttentionParams(rec["attention.w_q"], rec["attention.w_k"],
                                rec["attention.w_v"], rec["attention.b_q"],
                                rec["attention.b_k"], rec["attention.b_v"],
                                rec["attention.prelu"])
            x = sdpa(x, p)
        elif node.kind == "aggregate":
            spec = ConvSpec(x.shape[0], 1, (1,), bias=True)
            x = conv1d(x, spec, rec["agg.weight"], rec["agg.bias"])
        elif node.kind == "gap_proj":
            x = x[:, 0, :]  # frequency fully collapsed by the head
            shape_in = x.shape
            pooled = x.mean(axis=1)  # (C,)
            x = (rec["proj.weight"] @ pooled + rec["proj.bias"])[None, :]
        else:
            raise ParameterError(f"unknown plan node kind '{node.kind}'")
        if trace is not None:
            trace.append((node.name, tuple(shape_in), tuple(x.shape)))

    out = np.ascontiguousarray(x.ravel(), dtype=np.float32)
    if out.shape != (EMBED_DIM,):
        raise ShapeError("embedding", (EMBED_DIM,), out.shape, "embed output")
    return out


def embed_waveform(wave: np.ndarray, bundle) -> np.ndarray:
    """Convenience path: waveform -> mel map -> embedding."""
    from .frontend import melspec

    return embed(melspec(wave), bundle)
