import numpy as np
import pytest
from scipy.linalg import solve_toeplitz

from modkal import armodel


def _random_pd_acf(rng, order):
    # spectra of random sequences give positive-definite autocorrelations
    x = rng.standard_normal(64)
    spectrum = np.abs(np.fft.rfft(x)) ** 2 + 0.1
    acf = np.fft.irfft(spectrum)
    return acf[:order + 1] / acf[0]


class TestBuildModulationFrames:
    def test_start_arithmetic(self):
        frames = armodel.build_modulation_frames(np.arange(10.0), 4, 2)
        assert [f.start_frame for f in frames] == [0, 2, 4, 6]
        assert all(len(f.samples) == 4 for f in frames)

    def test_exact_length_gives_one_frame(self):
        frames = armodel.build_modulation_frames(np.arange(5.0), 5, 3)
        assert len(frames) == 1

    def test_unit_hop(self):
        frames = armodel.build_modulation_frames(np.arange(6.0), 5, 1)
        assert len(frames) == 2

    def test_short_track_rejected(self):
        with pytest.raises(ValueError, match="track too short"):
            armodel.build_modulation_frames(np.arange(3.0), 4, 1)


class TestAutocorrelation:
    def test_constant_frame_is_all_zero(self):
        r = armodel.autocorrelation(np.full(8, 3.0), 3)
        assert np.allclose(r, 0.0)

    def test_alternating_frame(self):
        r = armodel.autocorrelation(np.array([1.0, -1.0, 1.0, -1.0]), 1)
        assert r[1] / r[0] == pytest.approx(-0.75)

    def test_lag_zero_dominates(self):
        rng = np.random.default_rng(0)
        for _ in range(20):
            r = armodel.autocorrelation(rng.standard_normal(32), 5)
            assert np.all(r[0] >= np.abs(r[1:]) - 1e-12)

    def test_lag_bound(self):
        with pytest.raises(ValueError):
            armodel.autocorrelation(np.ones(4), 4)


class TestLevinsonDurbin:
    def test_order_one(self):
        m = armodel.levinson_durbin([1.0, 0.5], 1)
        assert m.coeffs == pytest.approx([0.5])
        assert m.residual_var == pytest.approx(0.75)

    def test_order_two_consistent_with_ar1(self):
        m = armodel.levinson_durbin([1.0, 0.5, 0.25], 2)
        assert m.coeffs == pytest.approx([0.5, 0.0], abs=1e-12)
        assert m.residual_var == pytest.approx(0.75)

    def test_white_input(self):
        m = armodel.levinson_durbin([1.0, 0.0, 0.0], 2)
        assert m.coeffs == pytest.approx([0.0, 0.0])
        assert m.residual_var == pytest.approx(1.0)

    def test_degenerate_autocorrelation_rejected(self):
        with pytest.raises(ValueError, match="degenerate autocorrelation"):
            armodel.levinson_durbin([0.0, 0.0], 1)

    @pytest.mark.parametrize("order", [1, 2, 3, 4])
    def test_matches_direct_yule_walker_solve(self, order):
        rng = np.random.default_rng(order)
        for _ in range(50):
            acf = _random_pd_acf(rng, order)
            m = armodel.levinson_durbin(acf, order)
            direct = solve_toeplitz(acf[:order], acf[1:order + 1])
            assert np.max(np.abs(m.coeffs - direct)) < 1e-10

    def test_residual_monotone_in_order(self):
        rng = np.random.default_rng(42)
        for _ in range(50):
            acf = _random_pd_acf(rng, 5)
            residuals = [armodel.levinson_durbin(acf, p).residual_var
                         for p in range(1, 5)]
            assert np.all(np.diff(residuals) <= 1e-12)

    def test_recovers_ar2_coefficients(self):
        rng = np.random.default_rng(3)
        a_true = np.array([1.2, -0.4])
        x = np.zeros(4000)
        for t in range(2, len(x)):
            x[t] = (a_true[0] * x[t - 1] + a_true[1] * x[t - 2]
                    + 0.3 * rng.standard_normal())
        r = armodel.autocorrelation(x, 2)
        m = armodel.levinson_durbin(r, 2)
        assert np.max(np.abs(m.coeffs - a_true)) < 0.05

    def test_unstable_reflection_clamped(self):
        # lag-1 correlation above lag 0 would give |k| >= 1 without the clamp
        m = armodel.levinson_durbin([1.0, 1.1], 1)
        assert abs(m.coeffs[0]) == pytest.approx(armodel.REFLECTION_CLAMP)
        assert m.residual_var >= 0


class TestWindowFits:
    def test_matches_scalar_path_per_window(self):
        rng = np.random.default_rng(9)
        tracks = rng.standard_normal((60, 3)).cumsum(axis=0)
        coeffs, resid, mu = armodel.ar2_window_fits(tracks, 16, 4)
        frames = armodel.build_modulation_frames(tracks[:, 1], 16, 4)
        for w, frame in enumerate(frames):
            model, mean = armodel.fit_ar(frame.samples, 2)
            assert np.allclose(coeffs[w, 1], model.coeffs, atol=1e-12)
            assert resid[w, 1] == pytest.approx(model.residual_var, abs=1e-12)
            assert mu[w, 1] == pytest.approx(mean)

    def test_order_one_fits(self):
        rng = np.random.default_rng(10)
        tracks = rng.standard_normal((40, 2))
        coeffs, resid, _ = armodel.ar2_window_fits(tracks, 16, 4, order=1)
        assert np.allclose(coeffs[..., 1], 0.0)
        assert np.all(resid >= 0)

    def test_constant_window_degenerates_cleanly(self):
        coeffs, resid, mu = armodel.ar2_window_fits(np.ones((20, 2)), 16, 4)
        assert np.allclose(coeffs, 0.0)
        assert np.allclose(resid, 0.0)
        assert np.allclose(mu, 1.0)
