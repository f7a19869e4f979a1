"""Classical single-frame spectral gain rules and a noise-PSD tracker.

Spectral subtraction, the MMSE short-time spectral amplitude estimator, and
its log-spectral-amplitude variant, driven by decision-directed a priori SNR
and sliding-window minimum-statistics noise estimates.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.special import exp1, i0e, i1e

from . import stft

POWER_FLOOR = 1e-12

DD_SMOOTHING = 0.98
MS_WINDOW_S = 1.5
MS_BIAS = 1.5
MS_SMOOTHING = 0.85
GAIN_FLOOR_DB = -25.0
MMSE_GAIN_MAX = 2.0

BASELINE_METHODS = ("specsub", "mmse", "logmmse")


@dataclass(frozen=True)
class SnrPair:
    """A priori (xi) and a posteriori (zeta_post) SNR, both linear scale."""

    xi: np.ndarray
    zeta_post: np.ndarray

    def __post_init__(self):
        xi = np.asarray(self.xi, dtype=np.float64)
        zeta = np.asarray(self.zeta_post, dtype=np.float64)
        if not (np.all(np.isfinite(xi)) and np.all(np.isfinite(zeta))):
            raise ValueError("SNR values must be finite")
        if np.any(xi < 0) or np.any(zeta < 0):
            raise ValueError("SNR values must be nonnegative")
        object.__setattr__(self, "xi", xi)
        object.__setattr__(self, "zeta_post", zeta)


@dataclass
class NoisePsd:
    """Per-bin noise power estimate with minimum-statistics internals."""

    lambda_: np.ndarray
    update_count: int
    smoothed: np.ndarray
    history: np.ndarray  # (window, K) ring buffer of smoothed powers
    window_frames: int

    @classmethod
    def create(cls, n_bins: int, window_frames: int) -> "NoisePsd":
        if window_frames < 1:
            raise ValueError("window must hold at least one frame")
        return cls(np.zeros(n_bins), 0, np.zeros(n_bins),
                   np.zeros((window_frames, n_bins)), window_frames)


def noise_psd_track(psd: NoisePsd, noisy_power_frame) -> NoisePsd:
    """Advance the minimum-statistics tracker by one frame.

    Recursive smoothing, a sliding-window minimum over the last
    ``window_frames`` frames, and a fixed bias compensation factor.
    """
    p = np.asarray(noisy_power_frame, dtype=np.float64)
    if psd.update_count == 0:
        smoothed = p.copy()
    else:
        smoothed = MS_SMOOTHING * psd.smoothed + (1.0 - MS_SMOOTHING) * p
    history = psd.history.copy()
    history[psd.update_count % psd.window_frames] = smoothed
    count = psd.update_count + 1
    valid = history[:min(count, psd.window_frames)]
    lam = np.maximum(MS_BIAS * valid.min(axis=0), POWER_FLOOR)
    return NoisePsd(lam, count, smoothed, history, psd.window_frames)


def track_noise_psd_matrix(power, hop_s: float) -> np.ndarray:
    """Run the minimum-statistics tracker over a (T, K) power matrix."""
    power = np.asarray(power, dtype=np.float64)
    window = max(1, round(MS_WINDOW_S / hop_s))
    psd = NoisePsd.create(power.shape[1], window)
    out = np.empty_like(power)
    for t in range(power.shape[0]):
        psd = noise_psd_track(psd, power[t])
        out[t] = psd.lambda_
    return out


def dd_apriori_snr(prev_clean_power, noisy_power, lam, a_dd: float = DD_SMOOTHING):
    """Decision-directed a priori SNR estimate."""
    lam = np.asarray(lam, dtype=np.float64)
    if np.any(lam <= 0):
        raise ValueError("noise power must be positive")
    if not (0.0 <= a_dd < 1.0):
        raise ValueError("a_dd must lie in [0, 1)")
    inst = np.maximum(np.asarray(noisy_power) / lam - 1.0, 0.0)
    return a_dd * (np.asarray(prev_clean_power) / lam) + (1.0 - a_dd) * inst


def spectral_subtract_gain(noisy_power, lam, oversubtraction: float = 4.0,
                           floor: float = 0.0):
    """Power-domain spectral subtraction gain with oversubtraction."""
    p = np.asarray(noisy_power, dtype=np.float64)
    lam = np.asarray(lam, dtype=np.float64)
    if oversubtraction < 1.0:
        raise ValueError("oversubtraction factor must be >= 1")
    residual = np.maximum(p - oversubtraction * lam, 0.0)
    g = np.sqrt(residual / np.maximum(p, POWER_FLOOR))
    return np.clip(g, floor, 1.0)


def _nu(snr: SnrPair):
    xi = snr.xi
    zeta = np.maximum(snr.zeta_post, 1e-300)
    return xi / (1.0 + xi) * zeta, zeta


def mmse_gain(snr: SnrPair):
    """MMSE short-time spectral amplitude gain.

    Evaluated through exponentially-scaled Bessel functions, which stay
    finite over the whole SNR range.  The raw estimator can exceed 1 at low
    a-posteriori SNR; the application stage clamps at ``MMSE_GAIN_MAX``.
    """
    nu, zeta = _nu(snr)
    nu = np.maximum(nu, 1e-300)
    half = nu / 2.0
    return (np.sqrt(np.pi * nu) / (2.0 * zeta)) * ((1.0 + nu) * i0e(half)
                                                   + nu * i1e(half))


def logmmse_gain(snr: SnrPair):
    """MMSE log-spectral amplitude gain (raw; clamped when applied)."""
    nu, _ = _nu(snr)
    nu = np.maximum(nu, 1e-300)
    return snr.xi / (1.0 + snr.xi) * np.exp(0.5 * exp1(nu))


def gains_for_method(method: str, power, lam, prev_clean_power,
                     a_dd: float = DD_SMOOTHING, g_min: float = 0.0):
    """One frame of per-bin gains plus the clean-power estimate to carry over."""
    zeta = np.clip(power / np.maximum(lam, POWER_FLOOR), 1e-6, 1e8)
    xi = dd_apriori_snr(prev_clean_power, power, np.maximum(lam, POWER_FLOOR), a_dd)
    xi = np.maximum(xi, g_min * g_min)
    if method == "specsub":
        g = spectral_subtract_gain(power, lam, floor=g_min)
    elif method == "mmse":
        g = np.clip(mmse_gain(SnrPair(xi, zeta)), g_min, MMSE_GAIN_MAX)
    elif method == "logmmse":
        g = np.clip(logmmse_gain(SnrPair(xi, zeta)), g_min, 1.0)
    else:
        raise ValueError(f"unknown method {method!r}")
    return g, g * g * power


def baseline_gain_matrix(power, hop_s: float, method: str,
                         a_dd: float = DD_SMOOTHING,
                         g_min_db: float = GAIN_FLOOR_DB) -> np.ndarray:
    """Per-frame gain matrix for a whole (T, K) noisy power spectrogram."""
    power = np.asarray(power, dtype=np.float64)
    g_min = 10.0 ** (g_min_db / 20.0)
    lam = track_noise_psd_matrix(power, hop_s)
    gains = np.empty_like(power)
    prev_clean = power[0].copy()
    for t in range(power.shape[0]):
        g, prev_clean = gains_for_method(method, power[t], lam[t], prev_clean,
                                         a_dd=a_dd, g_min=g_min)
        gains[t] = g
    return gains


def enhance_utterance_baseline(signal, sample_rate_hz: int, method: str,
                               frame_len: int | None = None,
                               hop: int | None = None,
                               a_dd: float = DD_SMOOTHING,
                               g_min_db: float = GAIN_FLOOR_DB) -> np.ndarray:
    """Analyze, track noise, gain, and resynthesize; output length == input."""
    if method not in BASELINE_METHODS:
        raise ValueError(f"unknown method {method!r}")
    signal = np.asarray(signal, dtype=np.float64)
    if frame_len is None:
        frame_len = round(0.020 * sample_rate_hz)
    if hop is None:
        hop = frame_len // 2
    n_pad = -(len(signal) - frame_len) % hop
    padded = np.concatenate([signal, np.zeros(n_pad)])
    spec = stft.analyze(padded, frame_len, hop, "sqrt_hann", sample_rate_hz)
    power = np.abs(spec.frames) ** 2
    gains = baseline_gain_matrix(power, hop / sample_rate_hz, method,
                                 a_dd=a_dd, g_min_db=g_min_db)
    out = stft.synthesize(stft.apply_gain(spec, gains))
    if len(out) < len(signal):
        out = np.concatenate([out, np.zeros(len(signal) - len(out))])
    return out[:len(signal)]
