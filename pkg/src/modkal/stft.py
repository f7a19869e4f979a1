"""Short-time Fourier analysis/synthesis and spectral-domain utilities.

The :class:`Spectrogram` is the common currency of every processing stage:
a ``(T, K)`` complex matrix of one-sided spectra plus the framing geometry
needed to invert it.  Synthesis uses weighted overlap-add with an explicit
window-coverage normalisation, which is exact whenever the window/hop pair
leaves no gap in the overlap-added squared window.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

POWER_FLOOR = 1e-12

WINDOW_IDS = ("hamming", "sqrt_hann", "rect")

DOMAINS = ("amplitude", "power", "log_power")


def window_samples(window_id: str, n: int) -> np.ndarray:
    """Return the length-``n`` periodic analysis window for ``window_id``."""
    k = np.arange(n)
    if window_id == "sqrt_hann":
        return np.sqrt(0.5 - 0.5 * np.cos(2.0 * np.pi * k / n))
    if window_id == "hamming":
        return 0.54 - 0.46 * np.cos(2.0 * np.pi * k / n)
    if window_id == "rect":
        return np.ones(n)
    raise ValueError(f"unknown window_id {window_id!r}")


@dataclass(frozen=True)
class Spectrogram:
    """One-sided complex STFT with its framing geometry.

    frames has shape (T, K) with K = frame_len_samples // 2 + 1.
    """

    frames: np.ndarray
    frame_len_samples: int
    hop_samples: int
    window_id: str
    sample_rate_hz: int

    def __post_init__(self):
        if self.frame_len_samples % 2 != 0:
            raise ValueError("frame length must be even")
        if not (1 <= self.hop_samples <= self.frame_len_samples):
            raise ValueError("hop must satisfy 1 <= hop <= frame length")
        if self.window_id not in WINDOW_IDS:
            raise ValueError(f"unknown window_id {self.window_id!r}")
        if self.frames.ndim != 2:
            raise ValueError("frames must be a (T, K) matrix")
        if self.frames.shape[1] != self.frame_len_samples // 2 + 1:
            raise ValueError("bin count must equal frame_len/2 + 1")

    @property
    def n_frames(self) -> int:
        return self.frames.shape[0]

    @property
    def n_bins(self) -> int:
        return self.frames.shape[1]

    @property
    def hop_s(self) -> float:
        return self.hop_samples / self.sample_rate_hz


@dataclass(frozen=True)
class RealSpectrogram:
    """Real-valued view of a spectrogram in one of the magnitude domains."""

    values: np.ndarray
    domain: str
    frame_len_samples: int
    hop_samples: int
    window_id: str
    sample_rate_hz: int

    def __post_init__(self):
        if self.domain not in DOMAINS:
            raise ValueError(f"unknown domain {self.domain!r}")
        if self.domain in ("amplitude", "power") and np.any(self.values < 0):
            raise ValueError(f"{self.domain} values must be nonnegative")
        if not np.all(np.isfinite(self.values)):
            raise ValueError("spectrogram values must be finite")


def analyze(signal, frame_len: int, hop: int, window_id: str = "sqrt_hann",
            sample_rate_hz: int = 16000) -> Spectrogram:
    """Slide a window over ``signal`` and take one-sided FFTs of each frame.

    Produces ``T = (len(signal) - frame_len) // hop + 1`` frames; trailing
    samples that do not fill a frame are dropped.
    """
    signal = np.asarray(signal, dtype=np.float64)
    if signal.ndim != 1:
        raise ValueError("signal must be one-dimensional")
    if frame_len % 2 != 0:
        raise ValueError("frame length must be even")
    if len(signal) < frame_len:
        raise ValueError("input too short: signal shorter than one frame")
    win = window_samples(window_id, frame_len)
    framed = np.lib.stride_tricks.sliding_window_view(signal, frame_len)[::hop]
    frames = np.fft.rfft(framed * win, axis=1)
    return Spectrogram(frames, frame_len, hop, window_id, sample_rate_hz)


def _coverage(window: np.ndarray, n_frames: int, hop: int) -> np.ndarray:
    """Overlap-added squared window over the full output length."""
    n = window.shape[0]
    out_len = (n_frames - 1) * hop + n
    cov = np.zeros(out_len)
    wsq = window * window
    for m in range(n_frames):
        cov[m * hop:m * hop + n] += wsq
    return cov


def synthesize(spec: Spectrogram) -> np.ndarray:
    """Weighted overlap-add inversion; length is ``(T - 1) * hop + frame_len``.

    Raises if the window/hop pair leaves coverage gaps away from the edges,
    i.e. if perfect reconstruction is impossible.
    """
    n = spec.frame_len_samples
    hop = spec.hop_samples
    win = window_samples(spec.window_id, n)
    cov = _coverage(win, spec.n_frames, hop)
    interior = cov[n:-n] if cov.shape[0] > 2 * n else cov
    if interior.size and interior.min() < 1e-8:
        raise ValueError("reconstruction condition violated: window/hop pair "
                         "does not cover the signal")
    frames_t = np.fft.irfft(spec.frames, n=n, axis=1) * win
    out = np.zeros((spec.n_frames - 1) * hop + n)
    for m in range(spec.n_frames):
        out[m * hop:m * hop + n] += frames_t[m]
    return out / np.maximum(cov, 1e-12)


def to_domain(spec: Spectrogram, target: str, floor: float = POWER_FLOOR) -> RealSpectrogram:
    """Convert complex frames to amplitude, power, or floored log-power."""
    mag2 = np.abs(spec.frames) ** 2
    if target == "amplitude":
        values = np.sqrt(mag2)
    elif target == "power":
        values = mag2
    elif target == "log_power":
        values = np.log(np.maximum(mag2, floor))
    else:
        raise ValueError(f"unknown domain {target!r}")
    return RealSpectrogram(values, target, spec.frame_len_samples,
                           spec.hop_samples, spec.window_id, spec.sample_rate_hz)


def apply_gain(spec: Spectrogram, gains) -> Spectrogram:
    """Scale each time-frequency cell by a real gain, leaving phase unchanged."""
    gains = np.asarray(gains, dtype=np.float64)
    if gains.shape != spec.frames.shape:
        raise ValueError(f"gain shape {gains.shape} does not match "
                         f"spectrogram shape {spec.frames.shape}")
    if np.any(gains < 0):
        raise ValueError("gains must be nonnegative")
    return Spectrogram(spec.frames * gains, spec.frame_len_samples,
                       spec.hop_samples, spec.window_id, spec.sample_rate_hz)


def hz_to_mel(f):
    return 2595.0 * np.log10(1.0 + np.asarray(f, dtype=np.float64) / 700.0)


def mel_to_hz(m):
    return 700.0 * (10.0 ** (np.asarray(m, dtype=np.float64) / 2595.0) - 1.0)


@dataclass(frozen=True)
class MelMap:
    """Triangular band weights (M, K) and their centre frequencies."""

    weights: np.ndarray
    centers_hz: np.ndarray


def mel_matrix(n_bins: int, n_mel: int = 23, sample_rate_hz: int = 16000) -> MelMap:
    """Build ``n_mel`` triangular bands with mel-uniform centres up to Nyquist.

    The first and last bands are extended flat to the spectrum edges so that
    every bin has nonzero total weight; each row is normalised to peak 1.
    """
    if not (2 <= n_mel < n_bins):
        raise ValueError("need 2 <= n_mel < n_bins")
    nyquist = sample_rate_hz / 2.0
    mel_pts = np.linspace(0.0, float(hz_to_mel(nyquist)), n_mel + 2)
    hz_pts = mel_to_hz(mel_pts)
    bin_hz = np.linspace(0.0, nyquist, n_bins)

    weights = np.zeros((n_mel, n_bins))
    for m in range(n_mel):
        lo, ctr, hi = hz_pts[m], hz_pts[m + 1], hz_pts[m + 2]
        rising = (bin_hz - lo) / max(ctr - lo, 1e-12)
        falling = (hi - bin_hz) / max(hi - ctr, 1e-12)
        tri = np.minimum(rising, falling)
        if m == 0:
            tri[bin_hz <= ctr] = 1.0
        if m == n_mel - 1:
            tri[bin_hz >= ctr] = 1.0
        tri = np.maximum(tri, 0.0)
        weights[m] = tri / tri.max()
    return MelMap(weights, hz_pts[1:-1].copy())


def band_gain_interpolate(mel_gains, mel_map: MelMap) -> np.ndarray:
    """Interpolate per-band gains onto bins by normalised triangular weighting."""
    mel_gains = np.asarray(mel_gains, dtype=np.float64)
    if mel_gains.shape != (mel_map.weights.shape[0],):
        raise ValueError("gain vector length does not match band count")
    if np.any(mel_gains < 0):
        raise ValueError("band gains must be nonnegative")
    num = mel_map.weights.T @ mel_gains
    den = mel_map.weights.sum(axis=0)
    return num / den
