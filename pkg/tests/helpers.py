"""Shared builders for synthetic bundles, tone audio, and toy datasets."""

import numpy as np

from edgespot.config import ModelConfig, plan_records
from edgespot.evaluate import Sample
from edgespot.frontend import (
    NUM_MELS,
    NUM_SAMPLES,
    SAMPLE_RATE,
    hz_to_mel,
    mel_to_hz,
    melspec,
    save_waveform,
)
from edgespot.graph import embed
from edgespot.weights import WeightBundle

# Blocks that change channel count or stride; only these carry the frequency
# branch in the routing bundle.  Every other block forwards its input through
# the residual alone.
_TRANSITION_BLOCKS = ("s1.b0", "s2.b0", "s3.b0", "s4.b0")

# Mel rows routed to embedding groups 0..4 by separable_bundle, and the
# measured per-band gain of that bundle (used to equalize band energy so the
# cosine geometry is driven by band membership, not loudness).
ROUTED_ROWS = (0, 8, 16, 24, 32)
_BAND_GAIN = np.array([671.2, 864.2, 998.9, 1075.9, 1127.0])

# Twelve distinct chords over the five routed bands.
TONE_CODES = (
    (0, 1), (0, 2), (0, 3), (0, 4), (1, 2), (1, 3), (1, 4),
    (2, 3), (2, 4), (3, 4), (0, 1, 2), (2, 3, 4),
)


def separable_bundle(cfg=None):
    """Hand-set weights that route five mel bands to disjoint embedding groups.

    The stem copies its input to every channel, transition blocks forward the
    frequency branch untouched (other blocks pass through their residual), the
    head's depthwise stage picks one of the five surviving frequency rows per
    channel, and attention plus aggregation reduce to a plain time average.
    Tones placed at the routed bands therefore land in disjoint embedding
    coordinates, which makes distinct tone subsets linearly separable.
    """
    cfg = cfg or ModelConfig("edgespot", 1)
    records = {"meta.config": np.array([0.0, float(cfg.tau)], dtype=np.float32)}
    for rec in plan_records(cfg):
        if rec.name == "meta.config":
            continue
        arr = np.zeros(rec.shape, dtype=np.float32)
        if rec.name == "pcen.params":
            # alpha=0, r=1: compression becomes the identity
            arr = np.array([0.0, 1.0, 2.0, 0.025], dtype=np.float32)
        elif rec.name.endswith((".gamma", ".var")):
            arr = np.ones(rec.shape, dtype=np.float32)
        elif rec.name == "stem.conv":
            arr[:, 0, 2, 2] = 1.0  # center tap: copy input to every channel
        elif (rec.name.endswith(".freq.dw")
                and rec.name.rsplit(".freq.dw", 1)[0] in _TRANSITION_BLOCKS):
            arr[:, 0, 1, 0] = 1.0  # center frequency tap at the first frame
        elif rec.name.endswith(".trans.conv"):
            arr[:, 0, 0, 0] = 1.0  # every output channel copies channel 0
        elif rec.name == "head.dw":
            for c in range(arr.shape[0]):
                arr[c, 0, c % 5, 2] = 1.0  # channel c selects frequency row c % 5
        elif rec.name == "head.pw":
            for j in range(min(arr.shape[0], arr.shape[1])):
                arr[j, j, 0, 0] = 1.0
        elif rec.name == "attention.w_v":
            for i in range(min(arr.shape)):
                arr[i, i] = 1.0  # zero queries/keys make attention a uniform average
        elif rec.name == "attention.prelu":
            arr[:] = 1.0
        elif rec.name == "agg.weight":
            arr[:] = 1.0 / arr.shape[1]
        records[rec.name] = arr
    return WeightBundle(config=cfg, records=records)


def routed_band_hz():
    """Center frequency in Hz of each routed mel row."""
    edges = np.linspace(hz_to_mel(0.0), hz_to_mel(8000.0), NUM_MELS + 2)
    return [float(mel_to_hz(edges[r + 1])) for r in ROUTED_ROWS]


def tone_clip(code, rng, band_hz=None):
    """One second of an energy-equalized tone chord over the routed bands."""
    band_hz = band_hz or routed_band_hz()
    t = np.arange(NUM_SAMPLES) / SAMPLE_RATE
    base = 0.25 * np.sqrt(900.0 / _BAND_GAIN)
    wave = np.zeros(NUM_SAMPLES)
    for g in code:
        amp = base[g] * (0.96 + 0.08 * rng.random())
        wave += amp * np.sin(2.0 * np.pi * band_hz[g] * t + rng.random() * 2.0 * np.pi)
    return wave.astype(np.float32)


def tone_dataset(bundle, clips_per_label=8, seed=7):
    """Embedded 12-label chord dataset for end-to-end episode tests."""
    rng = np.random.default_rng(seed)
    band_hz = routed_band_hz()
    samples = []
    for li, code in enumerate(TONE_CODES):
        label = f"tone{li:02d}"
        for i in range(clips_per_label):
            vec = embed(melspec(tone_clip(code, rng, band_hz)), bundle)
            samples.append(Sample(uid=f"{label}-{i}", label=label, vector=vec))
    return samples


def write_tone_corpus(root, n_labels=3, clips_per_label=6, seed=3):
    """Directory-per-label WAV corpus of distinct tone chords."""
    rng = np.random.default_rng(seed)
    band_hz = routed_band_hz()
    for li in range(n_labels):
        d = root / f"word{li}"
        d.mkdir(parents=True, exist_ok=True)
        for i in range(clips_per_label):
            save_waveform(d / f"clip{i}.wav", tone_clip(TONE_CODES[li], rng, band_hz))
    return root
