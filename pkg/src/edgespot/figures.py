"""Matplotlib renderings saved next to the delimited reports.

Every function writes one PNG with the Agg backend (no display required) and
returns the path it wrote.
"""

from __future__ import annotations

import os

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt  # noqa: E402  (backend must be set first)
import numpy as np  # noqa: E402


def save_feature_map(features: np.ndarray, path, title: str = "features"):
    """Heatmap of a (bands, frames) feature map."""
    fig, ax = plt.subplots(figsize=(7, 3.2))
    im = ax.imshow(np.asarray(features), aspect="auto", origin="lower",
                   interpolation="nearest", cmap="magma")
    ax.set_xlabel("frame")
    ax.set_ylabel("mel band")
    ax.set_title(title)
    fig.colorbar(im, ax=ax, label="magnitude")
    fig.tight_layout()
    fig.savefig(path, dpi=120)
    plt.close(fig)
    return path


def save_score_hist(pos_scores, neg_scores, path, threshold=None):
    """Overlaid positive/negative score distributions."""
    fig, ax = plt.subplots(figsize=(6, 3.6))
    bins = np.linspace(-1.0, 1.0, 41)
    ax.hist(neg_scores, bins=bins, alpha=0.6, label="negatives", color="#888888")
    ax.hist(pos_scores, bins=bins, alpha=0.6, label="positives", color="#d62728")
    if threshold is not None:
        ax.axvline(threshold, color="k", linestyle="--", linewidth=1,
                   label=f"threshold {threshold:.3f}")
    ax.set_xlabel("cosine score")
    ax.set_ylabel("count")
    ax.legend(loc="upper left", fontsize=8)
    fig.tight_layout()
    fig.savefig(path, dpi=120)
    plt.close(fig)
    return path


def save_tradeoff(points, path):
    """Accuracy (or detection rate) as a function of the FAR target."""
    pts = sorted(points, key=lambda p: p.far)
    fig, ax = plt.subplots(figsize=(5, 3.6))
    ax.plot([p.far for p in pts], [p.rate for p in pts], marker="o")
    ax.set_xscale("log")
    ax.set_xlabel("false-alarm rate target")
    ax.set_ylabel("rate at target")
    ax.set_ylim(-0.02, 1.02)
    ax.grid(True, which="both", alpha=0.3)
    fig.tight_layout()
    fig.savefig(path, dpi=120)
    plt.close(fig)
    return path


def save_footprint(rows, path, title: str):
    """Per-layer MAC and parameter bars from a cost table."""
    names = [r.name for r in rows]
    y = np.arange(len(names))
    fig, (ax1, ax2) = plt.subplots(1, 2, figsize=(9, 0.28 * len(names) + 1.6),
                                   sharey=True)
    ax1.barh(y, [r.macs / 1e6 for r in rows], color="#1f77b4")
    ax1.set_xlabel("MACs (millions)")
    ax2.barh(y, [r.params / 1e3 for r in rows], color="#ff7f0e")
    ax2.set_xlabel("params (thousands)")
    ax1.set_yticks(y, labels=names, fontsize=7)
    ax1.invert_yaxis()
    fig.suptitle(title)
    fig.tight_layout()
    fig.savefig(path, dpi=120)
    plt.close(fig)
    return path


def figure_dir(base) -> str:
    """Create (if needed) and return the figures output directory."""
    os.makedirs(base, exist_ok=True)
    return os.fspath(base)
