"""Audio frontend: WAV ingestion, mel spectrogram, PCEN, masking augmentation.

A 1-second 16 kHz waveform is converted to a 40x101 mel energy map with a
centered STFT (25 ms Hann window, 10 ms hop, 512-point FFT, HTK mel scale,
unnormalized triangular filters over 0..8 kHz), then optionally compressed by
per-channel energy normalization:

    out(t,f) = (E(t,f) / (eps + M(t,f))**alpha + delta)**r - delta**r
    M(t,f)   = (1 - s) * M(t-1,f) + s * E(t,f),   M(0,f) = E(0,f)

All transforms here are stateless; the smoother state lives inside a single
call.
"""

from __future__ import annotations

import os
from dataclasses import dataclass
from typing import Optional

import numpy as np
from scipy.io import wavfile

from .errors import AudioFormatError, ParameterError

SAMPLE_RATE = 16000
NUM_SAMPLES = 16000
WINDOW_LEN = 400
HOP_LEN = 160
FFT_SIZE = 512
NUM_MELS = 40
NUM_FRAMES = 101
PCEN_EPS = 1e-6


@dataclass(frozen=True)
class PcenParams:
    """Channel-shared energy-normalization scalars; eps is fixed."""

    alpha: float = 0.98
    r: float = 0.5
    delta: float = 2.0
    s: float = 0.025
    eps: float = PCEN_EPS

    def __post_init__(self):
        if not 0.0 <= self.alpha <= 1.0:
            raise ParameterError(f"pcen alpha must be in [0, 1], got {self.alpha}")
        if not 0.0 < self.r <= 1.0:
            raise ParameterError(f"pcen r must be in (0, 1], got {self.r}")
        if not self.delta > 0.0:
            raise ParameterError(f"pcen delta must be > 0, got {self.delta}")
        if not 0.0 < self.s < 1.0:
            raise ParameterError(f"pcen s must be in (0, 1), got {self.s}")
        if not self.eps > 0.0:
            raise ParameterError(f"pcen eps must be > 0, got {self.eps}")


@dataclass(frozen=True)
class AugmentSpec:
    """SpecAugment-style masking and time-stretch settings."""

    freq_mask_width: int = 6
    time_mask_width: int = 8
    stretch_lo: float = 0.9
    stretch_hi: float = 1.1
    freq_masks: int = 1
    time_masks: int = 1

    def __post_init__(self):
        if not 0 <= self.freq_mask_width <= NUM_MELS:
            raise ParameterError(f"freq mask width must be in [0, {NUM_MELS}]")
        if not 0 <= self.time_mask_width <= NUM_FRAMES:
            raise ParameterError(f"time mask width must be in [0, {NUM_FRAMES}]")
        if not 0.0 < self.stretch_lo <= self.stretch_hi:
            raise ParameterError("stretch range must satisfy 0 < lo <= hi")


def load_waveform(path) -> np.ndarray:
    """Read a mono 16 kHz WAV (PCM16 or IEEE float32) as float32 in [-1, 1].

    The waveform is zero-padded or trimmed to exactly one second.
    """
    try:
        rate, data = wavfile.read(os.fspath(path))
    except FileNotFoundError:
        raise
    except Exception as exc:
        raise AudioFormatError(f"{path}: unreadable WAV ({exc})") from exc
    if rate != SAMPLE_RATE:
        raise AudioFormatError(
            f"{path}: sample rate {rate} Hz requires resampling; expected {SAMPLE_RATE}"
        )
    if data.ndim == 2 and data.shape[1] == 1:
        data = data[:, 0]
    if data.ndim != 1:
        raise AudioFormatError(f"{path}: expected mono audio, got shape {data.shape}")
    if data.size == 0:
        raise AudioFormatError(f"{path}: empty audio stream")
    if data.dtype == np.int16:
        wave = data.astype(np.float32) / 32768.0
    elif data.dtype == np.float32:
        wave = data
    else:
        raise AudioFormatError(
            f"{path}: unsupported sample format {data.dtype}; need PCM16 or float32"
        )
    return pad_or_trim(wave)


def save_waveform(path, wave: np.ndarray) -> None:
    """Write a float32 WAV at 16 kHz (test fixtures and toy datasets)."""
    wavfile.write(os.fspath(path), SAMPLE_RATE, np.asarray(wave, dtype=np.float32))


def pad_or_trim(wave: np.ndarray, num_samples: int = NUM_SAMPLES) -> np.ndarray:
    """Zero-pad at the end or trim to exactly ``num_samples``."""
    wave = np.asarray(wave, dtype=np.float32).ravel()
    if wave.size >= num_samples:
        return np.ascontiguousarray(wave[:num_samples])
    out = np.zeros(num_samples, dtype=np.float32)
    out[: wave.size] = wave
    return out


def hz_to_mel(hz):
    return 2595.0 * np.log10(1.0 + np.asarray(hz, dtype=np.float64) / 700.0)


def mel_to_hz(mel):
    return 700.0 * (10.0 ** (np.asarray(mel, dtype=np.float64) / 2595.0) - 1.0)


def mel_filterbank(n_mels: int = NUM_MELS, fft_size: int = FFT_SIZE,
                   rate: int = SAMPLE_RATE, f_lo: float = 0.0,
                   f_hi: Optional[float] = None) -> np.ndarray:
    """Unnormalized triangular mel filters, shape (n_mels, fft_size//2 + 1)."""
    if f_hi is None:
        f_hi = rate / 2.0
    edges_hz = mel_to_hz(np.linspace(hz_to_mel(f_lo), hz_to_mel(f_hi), n_mels + 2))
    bin_hz = np.arange(fft_size // 2 + 1) * (rate / fft_size)
    fb = np.zeros((n_mels, bin_hz.size), dtype=np.float64)
    for m in range(n_mels):
        lo, mid, hi = edges_hz[m], edges_hz[m + 1], edges_hz[m + 2]
        up = (bin_hz - lo) / (mid - lo)
        down = (hi - bin_hz) / (hi - mid)
        fb[m] = np.maximum(0.0, np.minimum(up, down))
    return fb


def melspec(wave: np.ndarray, window_len: int = WINDOW_LEN, hop: int = HOP_LEN,
            fft_size: int = FFT_SIZE, n_mels: int = NUM_MELS) -> np.ndarray:
    """Centered power-spectrum mel map, shape (n_mels, frames), float32.

    Frames are centered by reflect-padding ``window_len // 2`` samples on each
    side, so a 16000-sample input yields exactly 101 frames.
    """
    wave = np.asarray(wave, dtype=np.float64).ravel()
    if wave.size == 0:
        raise AudioFormatError("cannot featurize an empty waveform")
    if wave.size < 2:
        raise AudioFormatError("waveform too short to frame")
    half = window_len // 2
    padded = np.pad(wave, (half, half), mode="reflect")
    n_frames = 1 + (padded.size - window_len) // hop
    idx = np.arange(window_len)[None, :] + hop * np.arange(n_frames)[:, None]
    frames = padded[idx] * np.hanning(window_len)[None, :]
    power = np.abs(np.fft.rfft(frames, n=fft_size, axis=1)) ** 2
    mel = mel_filterbank(n_mels, fft_size) @ power.T
    return np.ascontiguousarray(mel, dtype=np.float32)


def pcen_smooth(energies: np.ndarray, s: float) -> np.ndarray:
    """Causal first-order IIR smoother along time, initialized at frame 0."""
    if not 0.0 < s <= 1.0:
        raise ParameterError(f"smoothing coefficient must be in (0, 1], got {s}")
    e = np.asarray(energies, dtype=np.float64)
    m = np.empty_like(e)
    m[:, 0] = e[:, 0]
    for t in range(1, e.shape[1]):
        m[:, t] = (1.0 - s) * m[:, t - 1] + s * e[:, t]
    return m.astype(np.float32)


def pcen_compress(energies: np.ndarray, smoothed: np.ndarray,
                  params: PcenParams) -> np.ndarray:
    """Gain-normalize ``energies`` against ``smoothed`` and root-compress."""
    e = np.asarray(energies, dtype=np.float64)
    m = np.asarray(smoothed, dtype=np.float64)
    if e.shape != m.shape:
        raise ParameterError(
            f"energy/smoother shapes differ: {e.shape} vs {m.shape}"
        )
    gained = e / (params.eps + m) ** params.alpha
    out = (gained + params.delta) ** params.r - params.delta ** params.r
    return out.astype(np.float32)


def pcen(energies: np.ndarray, params: PcenParams) -> np.ndarray:
    """Per-channel energy normalization of a nonnegative energy map."""
    e = np.asarray(energies, dtype=np.float64)
    if e.ndim != 2:
        raise ParameterError(f"pcen expects a 2-D energy map, got rank {e.ndim}")
    if not np.all(np.isfinite(e)):
        raise ParameterError("pcen input contains NaN or infinity")
    if np.any(e < 0):
        raise ParameterError("pcen input must be nonnegative")
    out = pcen_compress(e, pcen_smooth(e, params.s), params)
    if not np.all(np.isfinite(out)):
        raise ParameterError("pcen produced non-finite output")
    return out


def time_stretch(energies: np.ndarray, factor: float) -> np.ndarray:
    """Stretch along time by linear interpolation, then pad/crop back.

    ``factor > 1`` slows the clip down (content widens, tail is cropped);
    ``factor < 1`` speeds it up (tail is zero-padded).
    """
    e = np.asarray(energies, dtype=np.float32)
    n_t = e.shape[1]
    stretched_len = max(1, int(round(n_t * factor)))
    src = np.arange(stretched_len, dtype=np.float64) / factor
    src = np.minimum(src, n_t - 1)
    grid = np.arange(n_t, dtype=np.float64)
    out = np.zeros((e.shape[0], n_t), dtype=np.float32)
    keep = min(n_t, stretched_len)
    for band in range(e.shape[0]):
        out[band, :keep] = np.interp(src[:keep], grid, e[band].astype(np.float64))
    return out


def apply_masks(energies: np.ndarray, freq_start: int, freq_width: int,
                time_start: int, time_width: int) -> np.ndarray:
    """Zero one frequency-band stripe and one time-frame stripe."""
    out = np.array(energies, dtype=np.float32, copy=True)
    out[freq_start: freq_start + freq_width, :] = 0.0
    out[:, time_start: time_start + time_width] = 0.0
    return out


def spec_augment(energies: np.ndarray, spec: AugmentSpec, seed: int) -> np.ndarray:
    """Seeded time-stretch plus one frequency mask and one time mask.

    Mask widths are drawn uniformly in [0, width]; output shape equals input
    shape; identical seeds give bitwise-identical outputs.
    """
    rng = np.random.default_rng(seed)
    e = np.asarray(energies, dtype=np.float32)
    n_f, n_t = e.shape
    factor = rng.uniform(spec.stretch_lo, spec.stretch_hi)
    out = time_stretch(e, factor) if factor != 1.0 else np.array(e, copy=True)
    for _ in range(spec.freq_masks):
        w = int(rng.integers(0, spec.freq_mask_width + 1))
        f0 = int(rng.integers(0, n_f - w + 1)) if w else 0
        out[f0: f0 + w, :] = 0.0
    for _ in range(spec.time_masks):
        w = int(rng.integers(0, spec.time_mask_width + 1))
        t0 = int(rng.integers(0, n_t - w + 1)) if w else 0
        out[:, t0: t0 + w] = 0.0
    return out
