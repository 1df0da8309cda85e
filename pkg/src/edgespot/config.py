"""Model variants, the per-stage layer table, and the executable layer plan.

Two backbone variants share the same stage table:

* ``edgespot``  - energy-normalization frontend, fused temporal convolutions
  in the two earliest stages, relative positional encoding, temporal
  self-attention, and a learned time-aggregation head.
* ``bcresnet``  - the plain broadcast-residual baseline: standard blocks
  everywhere, no frontend normalization, global average pooling over time
  followed by a linear projection to the embedding size.

Channel widths scale with the multiplier ``tau`` everywhere except the final
aggregation layer, whose output channel count is fixed at 1.  The plan built
here drives graph execution, parameter/MAC accounting, and weight-bundle
validation, so all three stay consistent by construction.
"""

from __future__ import annotations

from dataclasses import dataclass, field

from .errors import ParameterError
from .kernels import conv_out_extent

VARIANT_EDGESPOT = "edgespot"
VARIANT_BCRESNET = "bcresnet"
VARIANTS = (VARIANT_EDGESPOT, VARIANT_BCRESNET)

INPUT_SHAPE = (1, 40, 101)
NUM_FRAMES = 101
STEM_CHANNELS = 16
STEM_KERNEL = (5, 5)
HEAD_KERNEL = (5, 5)
HEAD_CHANNELS = 32          # pre-attention width, times tau
EMBED_DIM = 64
RPE_KERNEL = 16
RPE_PAD = (8, 7)            # taps at offsets -8 .. +7, length preserving
TEMPORAL_KERNEL = 3
FREQ_KERNEL = 3
SSN_SUBBANDS = 5
TAUS = (1, 2, 3, 4)


@dataclass(frozen=True)
class StageSpec:
    """One backbone stage: ``repeat`` blocks at width ``base_channels * tau``."""

    fused: bool
    repeat: int
    base_channels: int
    stride: tuple
    dilation: tuple


# Stage table at tau = 1.  Strides/dilations are (frequency, time) pairs; the
# stride pair applies to the first (transition) block of the stage only.
EDGESPOT_STAGES = (
    StageSpec(fused=True, repeat=2, base_channels=8, stride=(1, 1), dilation=(1, 1)),
    StageSpec(fused=True, repeat=2, base_channels=12, stride=(2, 1), dilation=(1, 2)),
    StageSpec(fused=False, repeat=4, base_channels=16, stride=(2, 1), dilation=(1, 4)),
    StageSpec(fused=False, repeat=4, base_channels=20, stride=(1, 1), dilation=(1, 8)),
)

BCRESNET_STAGES = tuple(
    StageSpec(fused=False, repeat=s.repeat, base_channels=s.base_channels,
              stride=s.stride, dilation=s.dilation)
    for s in EDGESPOT_STAGES
)


@dataclass(frozen=True)
class RecordSpec:
    """Name and shape of one float32 payload in a weight bundle."""

    name: str
    shape: tuple


@dataclass(frozen=True)
class Node:
    """One executable step of the inference graph.

    ``in_shape``/``out_shape`` are the feature-map shapes the step consumes
    and produces (channel-major for 2-D maps, ``(time, features)`` for the
    attention rows, matching the layer table's bookkeeping).
    """

    kind: str
    name: str
    in_shape: tuple
    out_shape: tuple
    records: tuple = ()
    cin: int = 0
    cout: int = 0
    stride: tuple = (1, 1)
    dilation: tuple = (1, 1)
    fused: bool = False
    transition: bool = False


@dataclass(frozen=True)
class ModelConfig:
    """Variant, width multiplier, and the resolved stage table."""

    variant: str
    tau: int
    stages: tuple = field(default=())

    def __post_init__(self):
        if self.variant not in VARIANTS:
            raise ParameterError(
                f"unknown variant '{self.variant}'; expected one of {VARIANTS}"
            )
        if self.tau not in TAUS:
            raise ParameterError(f"tau must be one of {TAUS}, got {self.tau}")
        if not self.stages:
            base = EDGESPOT_STAGES if self.variant == VARIANT_EDGESPOT else BCRESNET_STAGES
            object.__setattr__(self, "stages", base)

    @property
    def stem_channels(self) -> int:
        return STEM_CHANNELS * self.tau

    @property
    def head_channels(self) -> int:
        return HEAD_CHANNELS * self.tau

    def stage_channels(self, index: int) -> int:
        return self.stages[index].base_channels * self.tau

    @property
    def has_attention(self) -> bool:
        return self.variant == VARIANT_EDGESPOT

    @property
    def has_pcen(self) -> bool:
        return self.variant == VARIANT_EDGESPOT


def _norm_records(prefix: str, count: int) -> list:
    return [RecordSpec(f"{prefix}.{part}", (count,))
            for part in ("gamma", "beta", "mean", "var")]


def _block_node(name: str, cin: int, cout: int, stage: StageSpec, first: bool,
                f_in: int, t: int) -> Node:
    stride = stage.stride if first else (1, 1)
    transition = first and (cin != cout or stride != (1, 1))
    f_out = conv_out_extent(f_in, FREQ_KERNEL, stride[0], 1, "same")
    recs = []
    if transition:
        recs.append(RecordSpec(f"{name}.trans.conv", (cout, cin, 1, 1)))
        recs += _norm_records(f"{name}.trans.bn", cout)
    recs.append(RecordSpec(f"{name}.freq.dw", (cout, 1, FREQ_KERNEL, 1)))
    recs += _norm_records(f"{name}.freq.ssn", cout * SSN_SUBBANDS)
    if stage.fused:
        recs.append(RecordSpec(f"{name}.temp.conv", (cout, cout, TEMPORAL_KERNEL)))
        recs += _norm_records(f"{name}.temp.bn", cout)
    else:
        recs.append(RecordSpec(f"{name}.temp.dw", (cout, 1, TEMPORAL_KERNEL)))
        recs += _norm_records(f"{name}.temp.bn", cout)
        recs.append(RecordSpec(f"{name}.temp.pw", (cout, cout, 1)))
        recs.append(RecordSpec(f"{name}.temp.pw_bias", (cout,)))
    return Node(kind="block", name=name, in_shape=(cin, f_in, t),
                out_shape=(cout, f_out, t), records=tuple(recs),
                cin=cin, cout=cout, stride=stride, dilation=stage.dilation,
                fused=stage.fused, transition=transition)


def build_plan(cfg: ModelConfig) -> tuple:
    """Ordered executable nodes for one configuration."""
    tau = cfg.tau
    t = NUM_FRAMES
    nodes = []

    if cfg.has_pcen:
        nodes.append(Node(kind="pcen", name="pcen",
                          in_shape=INPUT_SHAPE, out_shape=INPUT_SHAPE,
                          records=(RecordSpec("pcen.params", (4,)),)))

    c = cfg.stem_channels
    f = conv_out_extent(INPUT_SHAPE[1], STEM_KERNEL[0], 2, 1, "same")
    nodes.append(Node(
        kind="stem", name="stem", in_shape=INPUT_SHAPE, out_shape=(c, f, t),
        records=tuple([RecordSpec("stem.conv", (c, 1) + STEM_KERNEL)]
                      + _norm_records("stem.bn", c)),
        cin=1, cout=c, stride=(2, 1)))

    cin = c
    for si, stage in enumerate(cfg.stages):
        cout = cfg.stage_channels(si)
        for bi in range(stage.repeat):
            node = _block_node(f"s{si + 1}.b{bi}", cin, cout, stage, bi == 0, f, t)
            nodes.append(node)
            cin, f = node.out_shape[0], node.out_shape[1]

    nodes.append(Node(
        kind="head_dw", name="head.dw", in_shape=(cin, f, t), out_shape=(cin, 1, t),
        records=(RecordSpec("head.dw", (cin, 1) + HEAD_KERNEL),
                 RecordSpec("head.dw_bias", (cin,))),
        cin=cin, cout=cin))

    ch = cfg.head_channels
    nodes.append(Node(
        kind="head_pw", name="head.pw", in_shape=(cin, 1, t), out_shape=(ch, 1, t),
        records=tuple([RecordSpec("head.pw", (ch, cin, 1, 1))]
                      + _norm_records("head.bn", ch)),
        cin=cin, cout=ch))

    if cfg.has_attention:
        nodes.append(Node(
            kind="rpe", name="rpe", in_shape=(ch, t), out_shape=(ch, t),
            records=(RecordSpec("rpe.filters", (ch, 1, RPE_KERNEL)),
                     RecordSpec("rpe.bias", (ch,))),
            cin=ch, cout=ch))
        att_recs = [RecordSpec(f"attention.w_{p}", (ch, EMBED_DIM)) for p in "qkv"]
        att_recs += [RecordSpec(f"attention.b_{p}", (EMBED_DIM,)) for p in "qkv"]
        att_recs.append(RecordSpec("attention.prelu", (1,)))
        nodes.append(Node(
            kind="attention", name="attention", in_shape=(t, ch),
            out_shape=(t, EMBED_DIM), records=tuple(att_recs),
            cin=ch, cout=EMBED_DIM))
        nodes.append(Node(
            kind="aggregate", name="agg", in_shape=(t, EMBED_DIM),
            out_shape=(1, EMBED_DIM),
            records=(RecordSpec("agg.weight", (1, t, 1)),
                     RecordSpec("agg.bias", (1,))),
            cin=t, cout=1))
    else:
        nodes.append(Node(
            kind="gap_proj", name="proj", in_shape=(ch, t), out_shape=(1, EMBED_DIM),
            records=(RecordSpec("proj.weight", (EMBED_DIM, ch)),
                     RecordSpec("proj.bias", (EMBED_DIM,))),
            cin=ch, cout=EMBED_DIM))

    return tuple(nodes)


def plan_records(cfg: ModelConfig) -> tuple:
    """All bundle records for a configuration, in canonical order."""
    recs = [RecordSpec("meta.config", (2,))]
    for node in build_plan(cfg):
        recs.extend(node.records)
    return tuple(recs)
