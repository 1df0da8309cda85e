"""Closed-form parameter and multiply-accumulate accounting.

Counting conventions, applied uniformly and emitted with every report so the
numbers are auditable:

* One MAC = one multiply-accumulate.  Convolution and matmul MACs are
  ``output elements x (in_channels / groups) x kernel size``.
* Biases, activations, pooling (adds only), and softmax cost 0 MACs.
* Normalization folds into one scale and one shift per element (2 ops each);
  those ops and the energy-normalization frontend (6 ops per cell: smoother
  multiply-add, gain power and divide, compression power and subtract) are
  tallied in a separate ``aux_ops`` column and excluded from the MAC total.
* Parameter counts include conv weights, biases, projection matrices, norm
  scale/shift pairs, and learned frontend scalars.  Norm running statistics
  are bookkeeping, not learned parameters, and are excluded.

``REFERENCE_FOOTPRINTS`` holds the published totals for the eight stock
configurations so reports can print deviation percentages.
"""

from __future__ import annotations

from dataclasses import dataclass

from .config import (
    EMBED_DIM,
    FREQ_KERNEL,
    HEAD_KERNEL,
    ModelConfig,
    Node,
    RPE_KERNEL,
    STEM_KERNEL,
    TEMPORAL_KERNEL,
    VARIANT_BCRESNET,
    VARIANT_EDGESPOT,
    build_plan,
)

# Published totals (params, MACs) per variant and width multiplier.
REFERENCE_FOOTPRINTS = {
    VARIANT_EDGESPOT: {
        1: (16_600, 4_500_000),
        2: (43_300, 10_300_000),
        3: (80_600, 18_600_000),
        4: (128_300, 29_400_000),
    },
    VARIANT_BCRESNET: {
        1: (10_900, 2_500_000),
        2: (30_600, 7_300_000),
        3: (59_200, 14_500_000),
        4: (96_600, 24_100_000),
    },
}


@dataclass(frozen=True)
class LayerCost:
    """One accounting row: shapes, learned params, MACs, and aux ops."""

    name: str
    in_shape: tuple
    out_shape: tuple
    params: int
    macs: int
    aux_ops: int = 0


def _learned_params(node: Node) -> int:
    total = 0
    for rec in node.records:
        if rec.name.endswith((".mean", ".var")):
            continue
        n = 1
        for ext in rec.shape:
            n *= ext
        total += n
    return total


def _node_macs(node: Node) -> tuple:
    """(macs, aux_ops) for one plan node."""
    k2 = STEM_KERNEL[0] * STEM_KERNEL[1]
    if node.kind == "pcen":
        cells = node.out_shape[1] * node.out_shape[2]
        return 0, 6 * cells
    if node.kind == "stem":
        c, f, t = node.out_shape
        return c * f * t * k2, 2 * c * f * t
    if node.kind == "block":
        cin, cout = node.cin, node.cout
        f_in, t = node.in_shape[1], node.in_shape[2]
        f_out = node.out_shape[1]
        macs = cout * f_out * t * FREQ_KERNEL  # depthwise frequency conv
        aux = 2 * cout * f_out * t             # sub-band norm
        if node.transition:
            macs += cout * f_in * t * cin      # 1x1 projection at input res
            aux += 2 * cout * f_in * t
        if node.fused:
            macs += cout * t * cout * TEMPORAL_KERNEL
        else:
            macs += cout * t * TEMPORAL_KERNEL + cout * t * cout
        aux += 2 * cout * t                    # temporal-branch norm
        return macs, aux
    if node.kind == "head_dw":
        c, _, t = node.out_shape
        return c * t * (HEAD_KERNEL[0] * HEAD_KERNEL[1]), 0
    if node.kind == "head_pw":
        c, _, t = node.out_shape
        return c * t * node.cin, 2 * c * t
    if node.kind == "rpe":
        c, t = node.out_shape
        return c * t * RPE_KERNEL, 0
    if node.kind == "attention":
        t, d = node.out_shape
        c = node.cin
        return 3 * t * d * c + 2 * t * t * d, 0
    if node.kind == "aggregate":
        t = node.in_shape[0]
        return EMBED_DIM * t, 0
    if node.kind == "gap_proj":
        return EMBED_DIM * node.cin, 0
    raise ValueError(f"unknown plan node kind '{node.kind}'")


def footprint(cfg: ModelConfig) -> tuple:
    """Per-layer cost table in execution order."""
    rows = []
    for node in build_plan(cfg):
        macs, aux = _node_macs(node)
        rows.append(LayerCost(node.name, node.in_shape, node.out_shape,
                              _learned_params(node), macs, aux))
    return tuple(rows)


def count_params(cfg: ModelConfig) -> int:
    """Total learned parameters; the per-layer table is :func:`footprint`."""
    return sum(row.params for row in footprint(cfg))


def count_macs(cfg: ModelConfig) -> int:
    """Total multiply-accumulates; the per-layer table is :func:`footprint`."""
    return sum(row.macs for row in footprint(cfg))


def _fmt_shape(shape: tuple) -> str:
    return "x".join(str(v) for v in shape)


def format_footprint(cfg: ModelConfig, fmt: str = "text",
                     compare: bool = False) -> str:
    """Render the cost table.

    ``fmt="text"`` gives an aligned human-readable table; ``fmt="tsv"`` gives
    one self-describing header line then tab-separated rows.  ``compare``
    appends the published totals with deviation percentages.
    """
    rows = footprint(cfg)
    total_p = sum(r.params for r in rows)
    total_m = sum(r.macs for r in rows)
    total_aux = sum(r.aux_ops for r in rows)
    lines = []
    if fmt == "tsv":
        lines.append("layer\tin_shape\tout_shape\tparams\tmacs\taux_ops")
        for r in rows:
            lines.append(f"{r.name}\t{_fmt_shape(r.in_shape)}\t"
                         f"{_fmt_shape(r.out_shape)}\t{r.params}\t{r.macs}\t{r.aux_ops}")
        lines.append(f"total\t-\t-\t{total_p}\t{total_m}\t{total_aux}")
    elif fmt == "text":
        lines.append(f"{cfg.variant}-{cfg.tau} footprint "
                     "(norms and frontend reported as aux ops, excluded from MACs)")
        for r in rows:
            lines.append(f"{r.name:<10} {_fmt_shape(r.in_shape):>9} -> "
                         f"{_fmt_shape(r.out_shape):>9} {r.params:>8} {r.macs:>10}")
        lines.append(f"{'total':<10} {'':>9}    {'':>9} {total_p:>8} {total_m:>10}")
        lines.append(f"aux ops (norm/frontend elementwise): {total_aux}")
    else:
        raise ValueError(f"unknown format '{fmt}'")
    if compare:
        ref_p, ref_m = REFERENCE_FOOTPRINTS[cfg.variant][cfg.tau]
        dev_p = 100.0 * (total_p - ref_p) / ref_p
        dev_m = 100.0 * (total_m - ref_m) / ref_m
        if fmt == "tsv":
            lines.append(f"reference\t-\t-\t{ref_p}\t{ref_m}\t-")
            lines.append(f"deviation_pct\t-\t-\t{dev_p:+.2f}\t{dev_m:+.2f}\t-")
        else:
            lines.append(f"reference totals: {ref_p} params, {ref_m} MACs")
            lines.append(f"deviation: {dev_p:+.2f}% params, {dev_m:+.2f}% MACs")
    return "\n".join(lines)
