"""Mel frontend, energy normalization, and augmentation behavior."""

import numpy as np
import pytest

from edgespot.errors import AudioFormatError, ParameterError
from edgespot.frontend import (
    FFT_SIZE,
    HOP_LEN,
    NUM_FRAMES,
    NUM_MELS,
    NUM_SAMPLES,
    SAMPLE_RATE,
    WINDOW_LEN,
    AugmentSpec,
    PcenParams,
    apply_masks,
    hz_to_mel,
    load_waveform,
    mel_filterbank,
    mel_to_hz,
    melspec,
    pad_or_trim,
    pcen,
    pcen_compress,
    pcen_smooth,
    save_waveform,
    spec_augment,
    time_stretch,
)


def tone(freq_hz, n=NUM_SAMPLES, amp=0.5):
    t = np.arange(n) / SAMPLE_RATE
    return (amp * np.sin(2.0 * np.pi * freq_hz * t)).astype(np.float32)


class TestMelScale:
    def test_round_trip(self, rng):
        hz = rng.uniform(0.0, 8000.0, size=200)
        np.testing.assert_allclose(mel_to_hz(hz_to_mel(hz)), hz, atol=1e-8)

    def test_monotone_increasing(self):
        hz = np.linspace(0.0, 8000.0, 500)
        assert np.all(np.diff(hz_to_mel(hz)) > 0)

    def test_zero_maps_to_zero(self):
        assert hz_to_mel(0.0) == 0.0
        assert mel_to_hz(0.0) == 0.0


class TestMelFilterbank:
    def test_shape_and_range(self):
        fb = mel_filterbank()
        assert fb.shape == (NUM_MELS, FFT_SIZE // 2 + 1)
        assert np.all(fb >= 0.0)
        assert np.all(fb <= 1.0 + 1e-12)  # unnormalized triangles peak at 1

    def test_every_filter_has_support(self):
        fb = mel_filterbank()
        assert np.all(fb.max(axis=1) > 0.0)

    def test_filter_support_lies_between_its_edges(self):
        fb = mel_filterbank()
        edges = mel_to_hz(np.linspace(hz_to_mel(0.0), hz_to_mel(8000.0), NUM_MELS + 2))
        bin_hz = np.arange(FFT_SIZE // 2 + 1) * (SAMPLE_RATE / FFT_SIZE)
        for m in range(NUM_MELS):
            nz = bin_hz[fb[m] > 0]
            assert np.all(nz > edges[m]) and np.all(nz < edges[m + 2])


class TestMelspec:
    def test_output_shape(self, rng):
        w = rng.standard_normal(NUM_SAMPLES).astype(np.float32)
        assert melspec(w).shape == (NUM_MELS, NUM_FRAMES)

    def test_zero_waveform_gives_zero_map(self):
        assert np.array_equal(melspec(np.zeros(NUM_SAMPLES, np.float32)),
                              np.zeros((NUM_MELS, NUM_FRAMES), np.float32))

    def test_one_frame_matches_explicit_dft(self):
        """Frame 50 of a noisy tone, recomputed term by term."""
        rng = np.random.default_rng(42)
        w = tone(440.0) + 0.01 * rng.standard_normal(NUM_SAMPLES).astype(np.float32)
        got = melspec(w)[:, 50]

        half = WINDOW_LEN // 2
        padded = np.pad(w.astype(np.float64), (half, half), mode="reflect")
        seg = padded[50 * HOP_LEN: 50 * HOP_LEN + WINDOW_LEN]
        n = np.arange(WINDOW_LEN)
        seg = seg * (0.5 - 0.5 * np.cos(2.0 * np.pi * n / (WINDOW_LEN - 1)))
        k = np.arange(FFT_SIZE // 2 + 1)
        basis = np.exp(-2j * np.pi * np.outer(k, n) / FFT_SIZE)
        power = np.abs(basis @ seg) ** 2
        want = mel_filterbank() @ power
        np.testing.assert_allclose(got, want, rtol=1e-5, atol=1e-7)

    def test_pure_tone_peaks_in_its_band(self):
        edges = mel_to_hz(np.linspace(hz_to_mel(0.0), hz_to_mel(8000.0), NUM_MELS + 2))
        for freq in (500.0, 1000.0, 2000.0, 4000.0):
            m = melspec(tone(freq))
            # band whose triangle is centered nearest the tone
            expect = int(np.argmin(np.abs(edges[1:-1] - freq)))
            peak_bands = np.argmax(m[:, 10:-10], axis=0)
            assert np.all(np.abs(peak_bands - expect) <= 1)

    def test_silence_then_tone_keeps_silent_frames_dark(self):
        w = np.zeros(NUM_SAMPLES, dtype=np.float32)
        w[8000:] = tone(1000.0)[:8000]
        m = melspec(w)
        # frames whose window never touches the tone: centers < 8000 - 200
        silent = m[:, :45]
        assert float(silent.max()) < 1e-8

    def test_empty_waveform_rejected(self):
        with pytest.raises(AudioFormatError):
            melspec(np.zeros(0, dtype=np.float32))


class TestPcenSmooth:
    def test_s_equal_one_returns_input(self, rng):
        e = rng.random((5, 9)).astype(np.float32)
        np.testing.assert_allclose(pcen_smooth(e, 1.0), e, atol=1e-7)

    def test_constant_input_is_fixed_point(self):
        e = np.full((3, 12), 0.7, dtype=np.float32)
        np.testing.assert_allclose(pcen_smooth(e, 0.3), e, atol=1e-7)

    def test_impulse_decays_geometrically(self):
        e = np.array([[1.0, 0.0, 0.0, 0.0]], dtype=np.float32)
        m = pcen_smooth(e, 0.5)
        np.testing.assert_allclose(m[0], [1.0, 0.5, 0.25, 0.125], atol=1e-9)

    def test_output_stays_within_input_range(self, rng):
        for _ in range(50):
            e = rng.random((4, 20))
            s = float(rng.uniform(0.01, 0.99))
            m = pcen_smooth(e, s)
            assert np.all(m >= e.min() - 1e-7)
            assert np.all(m <= e.max() + 1e-7)

    def test_out_of_range_coefficient_rejected(self):
        e = np.ones((2, 3), dtype=np.float32)
        for s in (0.0, -0.1, 1.5):
            with pytest.raises(ParameterError):
                pcen_smooth(e, s)


class TestPcen:
    def test_alpha_zero_r_one_is_identity(self, rng):
        e = rng.random((NUM_MELS, NUM_FRAMES)).astype(np.float32) * 3.0
        p = PcenParams(alpha=0.0, r=1.0, delta=2.0, s=0.5)
        np.testing.assert_allclose(pcen(e, p), e, atol=1e-6)

    def test_zero_input_gives_zero_output(self):
        e = np.zeros((NUM_MELS, NUM_FRAMES), dtype=np.float32)
        assert np.array_equal(pcen(e, PcenParams()), e)

    def test_constant_input_matches_scalar_recurrence(self):
        p = PcenParams(alpha=0.98, r=0.5, delta=2.0, s=0.5)
        e = np.ones((NUM_MELS, NUM_FRAMES), dtype=np.float64)
        got = pcen(e, p)
        m = 1.0  # scalar smoother state over a constant unit input
        for t in range(NUM_FRAMES):
            if t > 0:
                m = (1.0 - p.s) * m + p.s * 1.0
            want = (1.0 / (p.eps + m) ** p.alpha + p.delta) ** p.r - p.delta ** p.r
            np.testing.assert_allclose(got[:, t], want, atol=1e-6)

    def test_gain_invariance_at_full_normalization(self):
        """alpha=1 with tiny delta cancels any global input gain."""
        p = PcenParams(alpha=1.0, r=0.5, delta=1e-8, s=0.5)
        base = np.full((NUM_MELS, NUM_FRAMES), 0.4)
        lo = pcen(base, p)
        hi = pcen(1000.0 * base, p)
        steady = slice(10, None)
        rel = np.abs(hi[:, steady] - lo[:, steady]) / np.abs(lo[:, steady])
        assert float(rel.max()) < 1e-3

    def test_monotone_in_energy_with_smoother_fixed(self, rng):
        p_draw = rng
        for _ in range(1000):
            p = PcenParams(alpha=float(p_draw.uniform(0.0, 1.0)),
                           r=float(p_draw.uniform(0.05, 1.0)),
                           delta=float(p_draw.uniform(0.1, 4.0)),
                           s=0.5)
            m = np.full((1, 2), float(p_draw.uniform(0.01, 2.0)))
            e1 = float(p_draw.uniform(0.0, 2.0))
            e2 = e1 + float(p_draw.uniform(0.0, 2.0))
            lo = pcen_compress(np.full((1, 2), e1), m, p)
            hi = pcen_compress(np.full((1, 2), e2), m, p)
            assert np.all(hi >= lo - 1e-9)

    def test_parameter_bounds_enforced(self):
        for kwargs in ({"alpha": 1.5}, {"alpha": -0.1}, {"r": 0.0}, {"r": 1.2},
                       {"delta": 0.0}, {"s": 0.0}, {"s": 1.0}):
            with pytest.raises(ParameterError):
                PcenParams(**kwargs)

    def test_nan_and_negative_inputs_rejected(self):
        e = np.ones((2, 4), dtype=np.float32)
        bad = e.copy()
        bad[0, 0] = np.nan
        with pytest.raises(ParameterError):
            pcen(bad, PcenParams())
        neg = e.copy()
        neg[1, 2] = -0.5
        with pytest.raises(ParameterError):
            pcen(neg, PcenParams())


class TestAugment:
    def test_identity_settings_change_nothing(self, rng):
        e = rng.random((NUM_MELS, 30)).astype(np.float32)
        spec = AugmentSpec(freq_mask_width=0, time_mask_width=0,
                           stretch_lo=1.0, stretch_hi=1.0)
        np.testing.assert_array_equal(spec_augment(e, spec, seed=1), e)

    def test_masks_zero_exact_stripes(self, rng):
        e = rng.random((NUM_MELS, 20)).astype(np.float32) + 0.5
        out = apply_masks(e, 3, 6, 11, 4)
        assert np.all(out[3:9, :] == 0.0)
        assert np.all(out[:, 11:15] == 0.0)
        untouched = e.copy()
        untouched[3:9, :] = 0.0
        untouched[:, 11:15] = 0.0
        np.testing.assert_array_equal(out, untouched)

    def test_same_seed_is_bitwise_deterministic(self, rng):
        e = rng.random((NUM_MELS, NUM_FRAMES)).astype(np.float32)
        spec = AugmentSpec()
        a = spec_augment(e, spec, seed=9)
        b = spec_augment(e, spec, seed=9)
        assert np.array_equal(a, b)

    def test_shape_is_preserved(self, rng):
        e = rng.random((NUM_MELS, NUM_FRAMES)).astype(np.float32)
        for seed in range(5):
            assert spec_augment(e, AugmentSpec(), seed).shape == e.shape

    def test_unit_stretch_is_identity(self, rng):
        e = rng.random((4, 25)).astype(np.float32)
        np.testing.assert_allclose(time_stretch(e, 1.0), e, atol=1e-7)

    def test_invalid_spec_rejected(self):
        with pytest.raises(ParameterError):
            AugmentSpec(stretch_lo=1.2, stretch_hi=0.9)
        with pytest.raises(ParameterError):
            AugmentSpec(freq_mask_width=NUM_MELS + 1)


class TestWaveIo:
    def test_float32_round_trip(self, tmp_path, rng):
        w = (rng.random(NUM_SAMPLES).astype(np.float32) - 0.5)
        path = tmp_path / "clip.wav"
        save_waveform(path, w)
        np.testing.assert_allclose(load_waveform(path), w, atol=1e-7)

    def test_pcm16_is_scaled(self, tmp_path):
        from scipy.io import wavfile
        path = tmp_path / "pcm.wav"
        data = np.array([0, 16384, -32768, 32767], dtype=np.int16)
        wavfile.write(path, SAMPLE_RATE, data)
        w = load_waveform(path)
        np.testing.assert_allclose(w[:4], [0.0, 0.5, -1.0, 32767 / 32768],
                                   atol=1e-6)
        assert w.shape == (NUM_SAMPLES,)

    def test_wrong_sample_rate_rejected(self, tmp_path):
        from scipy.io import wavfile
        path = tmp_path / "slow.wav"
        wavfile.write(path, 8000, np.zeros(8000, dtype=np.int16))
        with pytest.raises(AudioFormatError, match="8000"):
            load_waveform(path)

    def test_stereo_rejected(self, tmp_path):
        from scipy.io import wavfile
        path = tmp_path / "stereo.wav"
        wavfile.write(path, SAMPLE_RATE, np.zeros((100, 2), dtype=np.int16))
        with pytest.raises(AudioFormatError, match="mono"):
            load_waveform(path)

    def test_pad_or_trim(self):
        short = np.ones(10, dtype=np.float32)
        out = pad_or_trim(short)
        assert out.shape == (NUM_SAMPLES,)
        assert np.all(out[:10] == 1.0) and np.all(out[10:] == 0.0)
        long = np.ones(NUM_SAMPLES + 5, dtype=np.float32)
        assert pad_or_trim(long).shape == (NUM_SAMPLES,)
