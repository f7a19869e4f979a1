import json

import numpy as np
import pytest

from modkal import evalkit, stft


class TestAddNoiseAtSnr:
    def test_hits_requested_snr(self):
        clean = evalkit.speechlike(2.0, 16000)
        noise = evalkit.white_noise(len(clean), seed=1)
        noisy = evalkit.add_noise_at_snr(clean, noise, 5.0, seed=2)
        mask = evalkit.active_sample_mask(clean)
        added = noisy - clean
        measured = 10.0 * np.log10(np.mean(clean[mask] ** 2)
                                   / np.mean(added[mask] ** 2))
        assert measured == pytest.approx(5.0, abs=0.01)

    def test_infinite_snr_returns_clean(self):
        clean = evalkit.speechlike(0.5, 16000)
        noise = evalkit.white_noise(len(clean), seed=1)
        out = evalkit.add_noise_at_snr(clean, noise, np.inf, seed=0)
        assert np.array_equal(out, clean)

    def test_seed_determinism(self):
        clean = evalkit.speechlike(0.5, 16000)
        noise = evalkit.white_noise(len(clean), seed=1)
        a = evalkit.add_noise_at_snr(clean, noise, 0.0, seed=7)
        b = evalkit.add_noise_at_snr(clean, noise, 0.0, seed=7)
        c = evalkit.add_noise_at_snr(clean, noise, 0.0, seed=8)
        assert np.array_equal(a, b)
        assert not np.array_equal(a, c)

    def test_zero_power_inputs_rejected(self):
        with pytest.raises(ValueError):
            evalkit.add_noise_at_snr(np.zeros(100), np.ones(100), 0.0)
        with pytest.raises(ValueError):
            evalkit.add_noise_at_snr(np.ones(100), np.zeros(100), 0.0)

    def test_short_noise_wraps(self):
        clean = evalkit.speechlike(1.0, 16000)
        noise = evalkit.white_noise(4000, seed=3)
        out = evalkit.add_noise_at_snr(clean, noise, 10.0, seed=4)
        assert out.shape == clean.shape


class TestDegrade:
    def test_unit_impulse_rir_is_identity(self):
        clean = evalkit.speechlike(0.5, 16000)
        out = evalkit.degrade(clean, rir=np.array([1.0]))
        assert np.allclose(out, clean)

    def test_zero_db_noise_has_equal_power(self):
        clean = evalkit.speechlike(1.0, 16000)
        noise = evalkit.white_noise(len(clean), seed=5)
        out = evalkit.degrade(clean, noise=noise, snr_db=0.0, seed=6)
        mask = evalkit.active_sample_mask(clean)
        added = out - clean
        ratio = np.mean(clean[mask] ** 2) / np.mean(added[mask] ** 2)
        assert 10 * np.log10(ratio) == pytest.approx(0.0, abs=0.01)

    def test_convolution_lengthens_output(self):
        clean = evalkit.speechlike(0.5, 16000)
        rir = evalkit.white_noise(1000, seed=7)
        out = evalkit.degrade(clean, rir=rir)
        assert len(out) == len(clean) + len(rir) - 1

    def test_needs_some_degradation(self):
        with pytest.raises(ValueError):
            evalkit.degrade(np.ones(100))


class TestSegSnr:
    def test_identical_signals_hit_ceiling(self):
        x = evalkit.speechlike(1.0, 16000)
        assert evalkit.seg_snr(x, x) == pytest.approx(35.0)

    def test_sign_flip(self):
        x = evalkit.speechlike(1.0, 16000)
        assert evalkit.seg_snr(x, -x) == pytest.approx(-10 * np.log10(4.0),
                                                       abs=1e-9)

    def test_uniform_frame_snr(self):
        rng = np.random.default_rng(8)
        x = evalkit.speechlike(2.0, 16000) + 1e-4
        n = (len(x) // 320) * 320
        x = x[:n]
        noise = rng.standard_normal(n).reshape(-1, 320)
        ref = x.reshape(-1, 320)
        scale = np.sqrt(np.sum(ref ** 2, axis=1)
                        / (np.sum(noise ** 2, axis=1) * 100.0))
        test = (ref + scale[:, None] * noise).ravel()
        assert evalkit.seg_snr(x, test, 320) == pytest.approx(20.0, abs=0.1)

    def test_mismatched_lengths_rejected(self):
        with pytest.raises(ValueError):
            evalkit.seg_snr(np.ones(100), np.ones(200))

    def test_all_silent_rejected(self):
        with pytest.raises(ValueError, match="silent"):
            evalkit.seg_snr(np.zeros(1000), np.zeros(1000))


class TestLsd:
    def _logspec(self, x):
        spec = stft.analyze(x, 320, 160, "sqrt_hann", 16000)
        return stft.to_domain(spec, "log_power")

    def test_identical_spectrograms(self):
        a = self._logspec(evalkit.speechlike(0.5, 16000))
        assert evalkit.lsd(a, a) == 0.0

    def test_uniform_one_db_offset(self):
        a = self._logspec(evalkit.speechlike(0.5, 16000))
        shifted = stft.RealSpectrogram(a.values + np.log(10 ** 0.1),
                                       "log_power", a.frame_len_samples,
                                       a.hop_samples, a.window_id,
                                       a.sample_rate_hz)
        assert evalkit.lsd(a, shifted) == pytest.approx(1.0, abs=1e-9)

    def test_symmetry(self):
        a = self._logspec(evalkit.speechlike(0.5, 16000))
        b = self._logspec(evalkit.white_noise(8000, seed=9, level=0.1))
        assert evalkit.lsd(a, b) == pytest.approx(evalkit.lsd(b, a))

    def test_shape_mismatch_rejected(self):
        a = self._logspec(evalkit.speechlike(0.5, 16000))
        b = self._logspec(evalkit.speechlike(0.25, 16000))
        with pytest.raises(ValueError):
            evalkit.lsd(a, b)


class TestIterativePhaseReconstruct:
    def test_true_phase_is_fixed_point(self):
        x = evalkit.speechlike(0.5, 16000)
        spec = stft.analyze(x, 320, 160, "sqrt_hann", 16000)
        target = stft.to_domain(spec, "amplitude")
        out = evalkit.iterative_phase_reconstruct(target,
                                                  np.angle(spec.frames),
                                                  iterations=1)
        n = 320
        lo, hi = n, len(out) - n
        err = np.linalg.norm(out[lo:hi] - x[lo:hi]) / np.linalg.norm(x[lo:hi])
        assert err < 1e-8

    def test_consistency_error_is_nonincreasing(self):
        rng = np.random.default_rng(10)
        mag = rng.exponential(size=(40, 161))
        target = stft.RealSpectrogram(mag, "amplitude", 320, 160,
                                      "sqrt_hann", 16000)
        errors = []
        for iterations in range(1, 31):
            out = evalkit.iterative_phase_reconstruct(target,
                                                      iterations=iterations)
            errors.append(evalkit.spectrogram_consistency(mag, out, target))
        assert np.all(np.diff(errors) <= 1e-9)

    def test_deterministic_with_zero_init(self):
        rng = np.random.default_rng(11)
        mag = rng.exponential(size=(20, 161))
        target = stft.RealSpectrogram(mag, "amplitude", 320, 160,
                                      "sqrt_hann", 16000)
        a = evalkit.iterative_phase_reconstruct(target, iterations=1)
        b = evalkit.iterative_phase_reconstruct(target, iterations=1)
        assert np.array_equal(a, b)

    def test_iteration_count_validated(self):
        target = stft.RealSpectrogram(np.ones((20, 161)), "amplitude", 320,
                                      160, "sqrt_hann", 16000)
        with pytest.raises(ValueError):
            evalkit.iterative_phase_reconstruct(target, iterations=0)


class TestMetricReport:
    def test_json_line_fields(self):
        report = evalkit.MetricReport("out.wav", "logmmse", 7.25, 1.5, "abc123")
        payload = json.loads(report.to_json_line())
        assert payload == {"file": "out.wav", "method": "logmmse",
                           "seg_snr_db": 7.25, "lsd_db": 1.5,
                           "config_hash": "abc123"}


class TestSpeechlike:
    def test_deterministic_and_bounded(self):
        a = evalkit.speechlike(1.0, 16000)
        b = evalkit.speechlike(1.0, 16000)
        assert np.array_equal(a, b)
        assert np.max(np.abs(a)) <= 0.3 + 1e-12

    def test_energy_sits_near_harmonics(self):
        # the fundamental wobbles around 120 Hz; the strongest spectral
        # peak should fall close to one of its low harmonics
        x = evalkit.speechlike(2.0, 16000)
        spec = np.abs(np.fft.rfft(x * np.hanning(len(x))))
        freqs = np.fft.rfftfreq(len(x), 1 / 16000)
        peak = freqs[np.argmax(spec)]
        nearest = round(peak / 120.0) * 120.0
        assert nearest > 0
        assert abs(peak - nearest) < 0.2 * 120.0
